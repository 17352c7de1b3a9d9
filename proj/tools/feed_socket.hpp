#pragma once

#include <string>

#include "rangeforge/error.hpp"

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cstring>

namespace rangeforge::tools {

/// Mirrors the engine's state-change stream to a listening UNIX-domain
/// stream socket as line-delimited JSON.
class FeedSocket {
public:
    explicit FeedSocket(const std::string& path) {
        fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
        if (fd_ < 0) throw Error("feed: cannot create socket");
        sockaddr_un addr{};
        addr.sun_family = AF_UNIX;
        if (path.size() >= sizeof(addr.sun_path)) {
            ::close(fd_);
            throw ValidationError("feed: socket path too long: " + path);
        }
        std::strncpy(addr.sun_path, path.c_str(), sizeof(addr.sun_path) - 1);
        if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
            ::close(fd_);
            throw Error("feed: cannot connect to socket " + path);
        }
    }

    ~FeedSocket() {
        if (fd_ >= 0) ::close(fd_);
    }

    FeedSocket(const FeedSocket&) = delete;
    FeedSocket& operator=(const FeedSocket&) = delete;

    void write_line(const std::string& line) {
        std::string framed = line;
        framed.push_back('\n');
        std::size_t off = 0;
        while (off < framed.size()) {
            const ssize_t n = ::write(fd_, framed.data() + off, framed.size() - off);
            if (n <= 0) throw Error("feed: short write to socket");
            off += static_cast<std::size_t>(n);
        }
    }

private:
    int fd_ = -1;
};

}  // namespace rangeforge::tools
