#include "rsonerf/core.hpp"

#include <cstdlib>
#include <fstream>

namespace rsonerf {

int worker_count(int cap) {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  if (const char* env = std::getenv("RSONERF_THREADS")) {
    const int limit = std::atoi(env);
    if (limit > 0) n = std::min(n, limit);
  }
  if (cap > 0) n = std::min(n, cap);
  return std::max(1, n);
}

std::string device_description() {
  std::string model = "cpu";
  std::ifstream info("/proc/cpuinfo");
  std::string line;
  while (std::getline(info, line)) {
    const auto pos = line.find("model name");
    if (pos != std::string::npos) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        model = line.substr(colon + 1);
        const auto first = model.find_first_not_of(" \t");
        if (first != std::string::npos) model = model.substr(first);
      }
      break;
    }
  }
  return model + " (" + std::to_string(worker_count()) + " threads)";
}

}  // namespace rsonerf
