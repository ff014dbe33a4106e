#pragma once

#include <cstdio>
#include <string>

namespace fbmch {

// Fixed 17-significant-digit rendering so that CSV diffs are byte-stable.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace fbmch
