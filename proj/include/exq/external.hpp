#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exq/common.hpp"

namespace exq {

// Line-delimited JSON adapter over a subprocess's stdin/stdout. One handle
// per worker; requests are serialized on the handle.
class ExternalModelHandle {
public:
    ExternalModelHandle(std::string command, int timeout_ms = 30000)
        : command_(std::move(command)), timeout_ms_(timeout_ms) {
        spawn();
        handshake();
    }

    ExternalModelHandle(const ExternalModelHandle&) = delete;
    ExternalModelHandle& operator=(const ExternalModelHandle&) = delete;

    ~ExternalModelHandle() {
        try {
            shutdown();
        } catch (...) {
        }
    }

    const std::string& name() const { return name_; }
    const std::string& representation() const { return representation_; }

    std::vector<double> predict(const std::vector<SparseVector>& inputs) {
        nlohmann::json req;
        req["op"] = "predict";
        req["inputs"] = nlohmann::json::array();
        for (const auto& sv : inputs)
            req["inputs"].push_back({{"dim", sv.dim}, {"idx", sv.indices}, {"val", sv.values}});
        return parse_probs(request(req), inputs.size());
    }

    std::vector<double> predict_tokens(const std::vector<std::vector<std::string>>& inputs) {
        nlohmann::json req;
        req["op"] = "predict";
        req["inputs"] = inputs;
        return parse_probs(request(req), inputs.size());
    }

    void shutdown() {
        if (pid_ <= 0) return;
        try {
            write_line(nlohmann::json{{"op", "bye"}}.dump());
        } catch (...) {
        }
        close_pipes();
        int status = 0;
        waitpid(pid_, &status, 0);
        pid_ = -1;
    }

private:
    void spawn() {
        int to_child[2], from_child[2];
        if (pipe(to_child) != 0 || pipe(from_child) != 0)
            throw Error("adapter: pipe() failed");
        pid_ = fork();
        if (pid_ < 0) throw Error("adapter: fork() failed");
        if (pid_ == 0) {
            dup2(to_child[0], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        close(to_child[0]);
        close(from_child[1]);
        write_fd_ = to_child[1];
        read_fd_ = from_child[0];
    }

    void close_pipes() {
        if (write_fd_ >= 0) close(write_fd_);
        if (read_fd_ >= 0) close(read_fd_);
        write_fd_ = read_fd_ = -1;
    }

    void handshake() {
        auto resp = request(nlohmann::json{{"op", "hello"}});
        if (resp.value("op", "") != "hello" || !resp.contains("representation"))
            throw Error("adapter protocol error: bad hello response: " + resp.dump());
        representation_ = resp["representation"].get<std::string>();
        if (representation_ != "sparse-vector" && representation_ != "token-sequence")
            throw Error("adapter protocol error: unknown representation '" + representation_ + "'");
        name_ = resp.value("name", "external");
    }

    nlohmann::json request(const nlohmann::json& req) {
        std::string line = req.dump();
        for (int attempt = 0; attempt < 2; ++attempt) {
            write_line(line);
            std::string out;
            if (read_line(out)) {
                nlohmann::json resp = nlohmann::json::parse(out, nullptr, false);
                if (resp.is_discarded())
                    throw Error("adapter protocol error: malformed response line: " + out);
                return resp;
            }
            // timeout: retry once, then give up
        }
        throw Error("adapter: request timed out twice (" + std::to_string(timeout_ms_) + " ms)");
    }

    std::vector<double> parse_probs(const nlohmann::json& resp, std::size_t expected) {
        if (resp.value("op", "") != "predict" || !resp.contains("probs") ||
            !resp["probs"].is_array() || resp["probs"].size() != expected)
            throw Error("adapter protocol error: bad predict response: " + resp.dump());
        std::vector<double> probs = resp["probs"].get<std::vector<double>>();
        for (double p : probs)
            if (!(p >= 0.0 && p <= 1.0))
                throw Error("adapter protocol error: probability out of [0,1]");
        return probs;
    }

    void write_line(const std::string& line) {
        if (write_fd_ < 0) throw Error("adapter: handle is closed");
        std::string payload = line + "\n";
        std::size_t off = 0;
        while (off < payload.size()) {
            ssize_t n = ::write(write_fd_, payload.data() + off, payload.size() - off);
            if (n <= 0) throw Error("adapter: subprocess pipe closed");
            off += static_cast<std::size_t>(n);
        }
    }

    // false on timeout
    bool read_line(std::string& out) {
        auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms_);
        for (;;) {
            auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                out = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return true;
            }
            auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 deadline - std::chrono::steady_clock::now())
                                 .count();
            if (remaining <= 0) return false;
            pollfd pfd{read_fd_, POLLIN, 0};
            int r = poll(&pfd, 1, static_cast<int>(remaining));
            if (r == 0) return false;
            if (r < 0) throw Error("adapter: poll() failed");
            char buf[4096];
            ssize_t n = ::read(read_fd_, buf, sizeof(buf));
            if (n <= 0) throw Error("adapter: subprocess exited unexpectedly");
            buffer_.append(buf, static_cast<std::size_t>(n));
        }
    }

    std::string command_;
    int timeout_ms_;
    pid_t pid_ = -1;
    int write_fd_ = -1;
    int read_fd_ = -1;
    std::string buffer_;
    std::string name_;
    std::string representation_;
};

}  // namespace exq
