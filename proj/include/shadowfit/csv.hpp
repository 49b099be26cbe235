#pragma once

#include <string>

#include "shadowfit/model.hpp"

// Flat-file dataset exchange. Header names the columns r, y, u1..ud (optional)
// and z1..zd (at least one). The outcome field is empty exactly when r = 0.

namespace shadowfit {

Dataset load_csv(const std::string& path);
void write_csv(const std::string& path, const Dataset& data);

}  // namespace shadowfit
