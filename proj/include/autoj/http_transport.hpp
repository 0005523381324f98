#pragma once

#include <memory>
#include <string>

#include <httplib.h>

#include "autoj/errors.hpp"
#include "autoj/gateway.hpp"

namespace autoj {

/// Production transport for chat-completion endpoints of the common shape
/// (POST a JSON body, Authorization header, JSON reply). The endpoint is a
/// full URL; everything after the host is the request path.
class LibHttpTransport final : public HttpTransport {
public:
    HttpResponse post(const std::string& endpoint, const std::vector<HttpHeader>& headers,
                      const std::string& body) override {
        std::size_t scheme_end = endpoint.find("://");
        if (scheme_end == std::string::npos) {
            raise(errc::config_error, "endpoint is not a URL: " + endpoint);
        }
        std::size_t path_start = endpoint.find('/', scheme_end + 3);
        std::string base = path_start == std::string::npos ? endpoint : endpoint.substr(0, path_start);
        std::string path = path_start == std::string::npos ? "/" : endpoint.substr(path_start);

        httplib::Client client(base);
        client.set_connection_timeout(30);
        client.set_read_timeout(600);
        httplib::Headers wire_headers;
        std::string content_type = "application/json";
        for (const HttpHeader& h : headers) {
            if (h.name == "Content-Type") {
                content_type = h.value;
            } else {
                wire_headers.emplace(h.name, h.value);
            }
        }
        httplib::Result result = client.Post(path, wire_headers, body, content_type);
        if (!result) {
            return {0, httplib::to_string(result.error())};
        }
        return {result->status, result->body};
    }
};

inline std::shared_ptr<HttpTransport> default_http_transport() {
    return std::make_shared<LibHttpTransport>();
}

}  // namespace autoj
