#pragma once
#include <string>
#include <vector>

namespace mofa {

// exit code 0 = success, 1 = domain error, 2 = usage error
int cli_main(int argc, const char* const* argv);
int cli_main(const std::vector<std::string>& args);  // without argv[0]

}  // namespace mofa
