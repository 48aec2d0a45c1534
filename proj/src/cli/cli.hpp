#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "livorlab/error.hpp"

namespace livorlab::cli {

/// 0 ok, 2 parse, 3 validation/domain, 4 store/IO, 5 internal.
int exit_code(Errc code) noexcept;

int run(int argc, char** argv);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace livorlab::cli
