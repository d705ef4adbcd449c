#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "aegon/hash.hpp"

namespace aegon {

// Append-only record file: magic "AEGL", version byte, then records of
// [u32 length | payload | u32 CRC32 of payload], little-endian. Recovery
// scans from the start and stops at the first short or corrupt record, so a
// torn tail write never poisons earlier records.
class RecordFile {
public:
    static constexpr char kMagic[4] = {'A', 'E', 'G', 'L'};
    static constexpr std::uint8_t kVersion = 1;

    RecordFile() = default;

    explicit RecordFile(const std::filesystem::path& path, bool sync_each_append = true)
        : path_(path), sync_(sync_each_append) {
        open();
    }

    RecordFile(RecordFile&& other) noexcept { *this = std::move(other); }
    RecordFile& operator=(RecordFile&& other) noexcept {
        close();
        path_ = std::move(other.path_);
        fd_ = other.fd_;
        sync_ = other.sync_;
        other.fd_ = -1;
        return *this;
    }
    RecordFile(const RecordFile&) = delete;
    RecordFile& operator=(const RecordFile&) = delete;

    ~RecordFile() { close(); }

    bool is_open() const { return fd_ >= 0; }

    void append(const Bytes& payload) {
        if (fd_ < 0) throw std::logic_error("RecordFile not open");
        Bytes rec(8 + payload.size());
        put_u32(rec.data(), static_cast<std::uint32_t>(payload.size()));
        std::memcpy(rec.data() + 4, payload.data(), payload.size());
        put_u32(rec.data() + 4 + payload.size(), crc32_of(payload));
        write_all(rec);
        if (sync_) ::fdatasync(fd_);
    }

    void append(std::string_view payload) { append(to_bytes(payload)); }

    // All records with a valid length and CRC, in order. `truncated` is set
    // when a trailing partial/corrupt record was discarded.
    static std::vector<Bytes> read_all(const std::filesystem::path& path,
                                       bool* truncated = nullptr) {
        if (truncated) *truncated = false;
        std::vector<Bytes> out;
        int fd = ::open(path.c_str(), O_RDONLY);
        if (fd < 0) return out;
        Bytes data;
        std::uint8_t buf[65536];
        ssize_t n;
        while ((n = ::read(fd, buf, sizeof(buf))) > 0) data.insert(data.end(), buf, buf + n);
        ::close(fd);

        if (data.size() < 5 || std::memcmp(data.data(), kMagic, 4) != 0 || data[4] != kVersion) {
            if (truncated && !data.empty()) *truncated = true;
            return out;
        }
        std::size_t pos = 5;
        while (pos + 8 <= data.size()) {
            std::uint32_t len = get_u32(data.data() + pos);
            if (pos + 8 + len > data.size()) break;
            std::uint32_t crc = get_u32(data.data() + pos + 4 + len);
            if (crc32_of(data.data() + pos + 4, len) != crc) break;
            out.emplace_back(data.begin() + static_cast<long>(pos + 4),
                             data.begin() + static_cast<long>(pos + 4 + len));
            pos += 8 + len;
        }
        if (truncated && pos != data.size()) *truncated = true;
        return out;
    }

    const std::filesystem::path& path() const { return path_; }

private:
    void open() {
        std::filesystem::create_directories(path_.parent_path().empty()
                                                ? std::filesystem::path(".")
                                                : path_.parent_path());
        bool fresh = !std::filesystem::exists(path_) || std::filesystem::file_size(path_) == 0;
        fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
        if (fd_ < 0) throw std::runtime_error("cannot open " + path_.string());
        if (fresh) {
            Bytes header(5);
            std::memcpy(header.data(), kMagic, 4);
            header[4] = kVersion;
            write_all(header);
            ::fdatasync(fd_);
        }
    }

    void close() {
        if (fd_ >= 0) {
            ::close(fd_);
            fd_ = -1;
        }
    }

    void write_all(const Bytes& data) {
        std::size_t off = 0;
        while (off < data.size()) {
            ssize_t n = ::write(fd_, data.data() + off, data.size() - off);
            if (n < 0) throw std::runtime_error("write failed: " + path_.string());
            off += static_cast<std::size_t>(n);
        }
    }

    static void put_u32(std::uint8_t* p, std::uint32_t v) {
        p[0] = static_cast<std::uint8_t>(v);
        p[1] = static_cast<std::uint8_t>(v >> 8);
        p[2] = static_cast<std::uint8_t>(v >> 16);
        p[3] = static_cast<std::uint8_t>(v >> 24);
    }

    static std::uint32_t get_u32(const std::uint8_t* p) {
        return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
               (static_cast<std::uint32_t>(p[2]) << 16) |
               (static_cast<std::uint32_t>(p[3]) << 24);
    }

    std::filesystem::path path_;
    int fd_ = -1;
    bool sync_ = true;
};

} // namespace aegon
