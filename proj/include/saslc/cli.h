// Command-line front end. Exit status: 0 ok, 1 usage error, 2 data error.

#ifndef SASLC_CLI_H_
#define SASLC_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace saslc {

// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace saslc

#endif  // SASLC_CLI_H_
