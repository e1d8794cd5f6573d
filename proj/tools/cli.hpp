#pragma once

#include <ostream>

namespace detadapt::cli {

// Exit codes: 0 success, 1 usage or configuration error, 2 data error.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace detadapt::cli
