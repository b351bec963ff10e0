#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace acceptance {

struct Options {
  int threads = 1;
};

struct Result {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;
};

/// Criteria are numbered 1..9.
Result run_criterion(int id, const Options& opts);
std::vector<Result> run_all(const Options& opts, const std::vector<int>& ids,
                            const std::function<void(const Result&)>& on_result = {});

/// "criterion N: PASS|FAIL  title  (detail)".
std::string format_line(const Result& r);

}  // namespace acceptance
