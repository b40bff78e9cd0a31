#ifndef LEVSIM_WARNINGS_HPP
#define LEVSIM_WARNINGS_HPP

#include <iostream>
#include <string>
#include <vector>

namespace levsim {

// Non-fatal diagnostics channel. Functions that can detect questionable but
// non-fatal conditions accept a WarningSink*; with a null sink the message
// goes to stderr so interactive runs still see it.
using WarningSink = std::vector<std::string>;

inline void warn(WarningSink* sink, const std::string& msg) {
  if (sink)
    sink->push_back(msg);
  else
    std::cerr << "warning: " << msg << "\n";
}

} // namespace levsim

#endif
