#pragma once

#include <string>

namespace flowpersp {

// printf-style %.<digits>g, the precision used by every CSV the tools write.
std::string format_sig(double value, int digits = 6);

}  // namespace flowpersp
