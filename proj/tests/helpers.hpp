#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "critmass/dataset.hpp"

namespace testutil {

inline std::string data_path(const std::string& file) {
    return std::string(CRITMASS_DATA_DIR) + "/" + file;
}

inline critmass::Dataset load_fixture() {
    std::ifstream in(data_path("rae2008_stats_or.csv"));
    return critmass::load_dataset(in);
}

inline critmass::Dataset load_fixture_active() {
    return critmass::exclude(load_fixture(), 9);
}

inline critmass::Dataset from_csv(const std::string& text) {
    std::istringstream in(text);
    return critmass::load_dataset(in);
}

}  // namespace testutil
