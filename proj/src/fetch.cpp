#include "varlab/fetch.hpp"

#include <zlib.h>

#include <chrono>
#include <fcntl.h>
#include <fstream>
#include <thread>
#include <unistd.h>

#include "httplib.h"
#include "varlab/digest.hpp"
#include "varlab/errors.hpp"

namespace varlab {

namespace {

struct UrlParts {
    std::string host_port;  // scheme://host[:port]
    std::string path;
};

UrlParts split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ValidationError("fetch: url missing scheme: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

// Cross-process serialization per destination file.
class FileLock {
public:
    explicit FileLock(const std::filesystem::path& target)
        : path_(target.string() + ".lock") {
        for (;;) {
            fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
            if (fd_ >= 0) return;
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
    }
    ~FileLock() {
        if (fd_ >= 0) ::close(fd_);
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }

private:
    std::string path_;
    int fd_ = -1;
};

}  // namespace

std::vector<unsigned char> gunzip(const std::vector<unsigned char>& compressed) {
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) {
        throw Error("gunzip: inflateInit failed");
    }
    std::vector<unsigned char> out;
    std::vector<unsigned char> buf(1 << 16);
    zs.next_in = const_cast<Bytef*>(compressed.data());
    zs.avail_in = static_cast<uInt>(compressed.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = buf.data();
        zs.avail_out = static_cast<uInt>(buf.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw ParseError("gunzip: corrupt gzip stream");
        }
        out.insert(out.end(), buf.data(), buf.data() + (buf.size() - zs.avail_out));
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            throw ParseError("gunzip: truncated gzip stream");
        }
    }
    inflateEnd(&zs);
    return out;
}

std::filesystem::path fetch_dataset(const std::string& url, const std::string& expected_sha256,
                                    const std::filesystem::path& dest) {
    std::filesystem::create_directories(dest.parent_path().empty() ? "." : dest.parent_path());
    FileLock lock(dest);

    if (std::filesystem::exists(dest) && sha256_file(dest) == expected_sha256) {
        return dest;
    }

    const UrlParts parts = split_url(url);
    httplib::Client client(parts.host_port);
    client.set_connection_timeout(30);
    client.set_read_timeout(120);
    auto res = client.Get(parts.path);
    if (!res || res->status != 200) {
        throw IoError("fetch: GET " + url + " failed" +
                      (res ? " with status " + std::to_string(res->status) : ""));
    }

    std::vector<unsigned char> payload(res->body.begin(), res->body.end());
    if (url.size() > 3 && url.substr(url.size() - 3) == ".gz") {
        payload = gunzip(payload);
    }

    const std::string digest = sha256_hex(payload.data(), payload.size());
    if (digest != expected_sha256) {
        throw ChecksumError("fetch: checksum mismatch for " + url + ": expected " +
                            expected_sha256 + ", got " + digest);
    }

    const std::filesystem::path tmp = dest.string() + ".part";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("fetch: cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(payload.data()),
                  static_cast<std::streamsize>(payload.size()));
    }
    std::filesystem::rename(tmp, dest);
    return dest;
}

}  // namespace varlab
