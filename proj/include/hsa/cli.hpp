#pragma once

#include <iosfwd>

namespace hsa {

/// Entry point of the hsa_net tool. Returns 0 on success, 2 on usage errors and 1 on runtime errors.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hsa
