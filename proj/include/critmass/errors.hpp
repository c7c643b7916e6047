#pragma once

#include <stdexcept>
#include <string>

namespace critmass {

// Exit-code classes follow the CLI contract: 1 = analysis error, 2 = I/O or
// usage error. Library throws; the CLI maps what() + stage + code.
struct error : std::runtime_error {
    int exit_code;
    std::string stage;
    error(const std::string& msg, int code, std::string stage_label)
        : std::runtime_error(msg), exit_code(code), stage(std::move(stage_label)) {}
};

struct validation_error : error {
    explicit validation_error(const std::string& msg, const std::string& stage_label = "validate")
        : error(msg, 2, stage_label) {}
};

struct parse_error : error {
    explicit parse_error(const std::string& msg) : error(msg, 2, "load") {}
};

struct io_error : error {
    explicit io_error(const std::string& msg, const std::string& stage_label = "load")
        : error(msg, 2, stage_label) {}
};

struct usage_error : error {
    explicit usage_error(const std::string& msg) : error(msg, 2, "usage") {}
};

struct lookup_error : error {
    explicit lookup_error(const std::string& msg) : error(msg, 2, "exclude") {}
};

struct singularity_error : error {
    explicit singularity_error(const std::string& msg) : error(msg, 1, "fit") {}
};

struct degenerate_error : error {
    explicit degenerate_error(const std::string& msg) : error(msg, 1, "fit") {}
};

struct instability_error : error {
    explicit instability_error(const std::string& msg) : error(msg, 1, "bootstrap") {}
};

struct convergence_error : error {
    explicit convergence_error(const std::string& msg) : error(msg, 1, "fit") {}
};

struct domain_error : error {
    explicit domain_error(const std::string& msg, const std::string& stage_label = "fit")
        : error(msg, 1, stage_label) {}
};

struct state_error : error {
    explicit state_error(const std::string& msg, const std::string& stage_label = "analyze")
        : error(msg, 1, stage_label) {}
};

}  // namespace critmass
