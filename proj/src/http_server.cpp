#include <atomic>

#include <httplib.h>

#include "ehrtl/api.hpp"

namespace ehrtl {

struct HttpServer::Impl {
    const ApiService& service;
    httplib::Server server;
    std::string address;
    std::atomic<bool> serving{false};

    explicit Impl(const ApiService& s) : service(s) {}

    void dispatch(const httplib::Request& req, httplib::Response& res) const {
        ApiRequest api;
        api.method = req.method;
        api.path = req.path;
        for (const auto& [k, v] : req.params) api.query.emplace(k, v);
        api.body = req.body;
        auto out = service.handle(api);
        res.status = out.status;
        res.set_content(std::move(out.body), out.content_type);
    }
};

HttpServer::HttpServer(const ApiService& service, std::optional<std::string> static_dir)
    : impl_(std::make_unique<Impl>(service)) {
    // SO_REUSEADDR only: the library default also sets SO_REUSEPORT, which
    // would let a second server bind an occupied port silently.
    impl_->server.set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });
    auto handler = [this](const httplib::Request& req, httplib::Response& res) { impl_->dispatch(req, res); };
    const char* api = R"(/v1/.*)";
    impl_->server.Get(api, handler);
    impl_->server.Put(api, handler);
    impl_->server.Post(api, handler);
    impl_->server.Delete(api, handler);
    impl_->server.Patch(api, handler);
    if (static_dir && !impl_->server.set_mount_point("/", *static_dir))
        throw std::invalid_argument("static directory '" + *static_dir + "' does not exist");
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    int bound = -1;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (impl_->server.bind_to_port(host, port)) {
        bound = port;
    }
    if (bound < 0) throw BindError("cannot bind to " + host + ":" + std::to_string(port) + " (address in use or not permitted)");
    impl_->address = host + ":" + std::to_string(bound);
    return bound;
}

void HttpServer::serve() {
    impl_->serving = true;
    impl_->server.listen_after_bind();
    impl_->serving = false;
}

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace ehrtl
