#include "ccvl/digest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "ccvl/errors.hpp"

namespace ccvl {

std::string to_hex(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string digest_hex(std::string_view bytes) { return to_hex(fnv1a64(bytes)); }

std::string digest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("digest_file: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return digest_hex(buf.str());
}

}  // namespace ccvl
