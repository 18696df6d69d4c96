#pragma once

// Private helper: splits "http://host:port/path" for cpp-httplib.

#include "mas2/errors.hpp"

#include <string>

namespace mas2::detail {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;    // begins with '/'
};

inline Endpoint parse_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos || url.substr(0, scheme_end) != "http")
        throw UsageError("endpoint must start with http:// : '" + url + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    Endpoint e;
    e.origin = url.substr(0, path_start);
    e.path = path_start == std::string::npos ? "/" : url.substr(path_start);
    if (e.origin.size() <= scheme_end + 3) throw UsageError("endpoint has no host: '" + url + "'");
    return e;
}

} // namespace mas2::detail
