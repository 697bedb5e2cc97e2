/*
 Copyright 2026 The safeedit Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

// Client for the remote vision-language detector.
//
// live    one POST per audit, retried on transient failure
// record  live, and every exchange is persisted to the fixture directory
// replay  answers come only from the fixture directory; no network, no auth
//
// Fixtures are keyed by a SHA-256 digest over the image bytes and prompt text.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>

#include <openssl/evp.h>

#include <httplib.h>
#include <json.hpp>

#include "safeedit/error.hpp"
#include "safeedit/image_io.hpp"

namespace safeedit {

enum class ClientMode
{
    live,
    record,
    replay,
};

inline ClientMode parse_client_mode(const std::string& s)
{
    if (s == "live")
        return ClientMode::live;
    if (s == "record")
        return ClientMode::record;
    if (s == "replay")
        return ClientMode::replay;
    throw ConfigError("unknown client mode '" + s + "' (expected live, record or replay)");
}

struct ClientConfig
{
    std::string endpoint_url;
    // Name of the environment variable holding the bearer token. Empty for
    // unauthenticated endpoints.
    std::string auth_token_source;
    double timeout = 30.0; // seconds
    int max_retries = 3;
    ClientMode mode = ClientMode::replay;
    std::size_t max_in_flight = 4;
    double backoff_initial = 0.5; // seconds, doubled per retry, capped at timeout
    std::filesystem::path fixtures;
};

inline void check_client_config(const ClientConfig& c)
{
    if (!(c.timeout > 0.0))
        throw ConfigError("client timeout must be > 0");
    if (c.max_retries < 0)
        throw ConfigError("max_retries must be >= 0");
    if (c.max_in_flight == 0)
        throw ConfigError("max_in_flight must be >= 1");
    if (c.backoff_initial < 0.0)
        throw ConfigError("backoff must be >= 0");
    if (c.mode != ClientMode::live && c.fixtures.empty())
        throw ConfigError("record and replay modes need a fixture directory");
    if (c.mode != ClientMode::replay && c.endpoint_url.empty())
        throw ConfigError("live and record modes need an endpoint URL");
}

// ---- hashing ---------------------------------------------------------------------

inline std::string sha256_hex(std::string_view data)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw IoError("SHA-256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i)
    {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xf]);
    }
    return out;
}

// Length-prefixed so (image, prompt) boundaries cannot alias.
inline std::string request_digest(std::string_view image_bytes, std::string_view prompt)
{
    std::string buf = "safeedit-audit-v1";
    buf.push_back('\0');
    std::uint64_t n = image_bytes.size();
    for (int k = 0; k < 8; ++k)
        buf.push_back(static_cast<char>((n >> (8 * k)) & 0xffu));
    buf.append(image_bytes);
    buf.append(prompt);
    return sha256_hex(buf);
}

inline std::string base64_encode(std::string_view bytes)
{
    std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

inline std::string utc_timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ---- fixtures --------------------------------------------------------------------------

struct AuditExchange
{
    std::string request_digest;
    std::string prompt_digest;
    std::string response_text;
    std::string timestamp;
};

// One file per exchange, <digest>.txt:
//
//   # safeedit-exchange v1
//   # digest: <hex>
//   # prompt-sha256: <hex>
//   # timestamp: <UTC>
//   # response-bytes: <n>
//   <empty line>
//   <raw response, exactly n bytes>
class FixtureStore
{
public:
    explicit FixtureStore(std::filesystem::path dir)
        : m_dir(std::move(dir))
    {
    }

    const std::filesystem::path& directory() const { return m_dir; }

    std::filesystem::path path_for(const std::string& digest) const { return m_dir / (digest + ".txt"); }

    static std::string encode(const AuditExchange& e)
    {
        std::string s = "# safeedit-exchange v1\n";
        s += "# digest: " + e.request_digest + "\n";
        s += "# prompt-sha256: " + e.prompt_digest + "\n";
        s += "# timestamp: " + e.timestamp + "\n";
        s += "# response-bytes: " + std::to_string(e.response_text.size()) + "\n\n";
        s += e.response_text;
        return s;
    }

    static AuditExchange decode(std::string_view text)
    {
        AuditExchange e;
        std::size_t pos = 0;
        std::optional<std::size_t> length;
        while (true)
        {
            const auto nl = text.find('\n', pos);
            if (nl == std::string_view::npos)
                throw IoError("fixture header is not terminated");
            const std::string_view line = text.substr(pos, nl - pos);
            pos = nl + 1;
            if (line.empty())
                break;
            auto value_of = [&](std::string_view key) -> std::optional<std::string> {
                const std::string prefix = "# " + std::string(key) + ": ";
                if (line.substr(0, prefix.size()) == prefix)
                    return std::string(line.substr(prefix.size()));
                return std::nullopt;
            };
            if (auto v = value_of("digest"))
                e.request_digest = *v;
            else if (auto v = value_of("prompt-sha256"))
                e.prompt_digest = *v;
            else if (auto v = value_of("timestamp"))
                e.timestamp = *v;
            else if (auto v = value_of("response-bytes"))
                length = std::stoull(*v);
        }
        e.response_text = std::string(text.substr(pos));
        if (length && *length != e.response_text.size())
            throw IoError("fixture body length does not match its header");
        return e;
    }

    std::optional<AuditExchange> find(const std::string& digest) const
    {
        {
            std::shared_lock lock(m_mutex);
            if (auto it = m_cache.find(digest); it != m_cache.end())
                return it->second;
        }
        const auto path = path_for(digest);
        if (!std::filesystem::exists(path))
            return std::nullopt;
        AuditExchange e = decode(read_file(path));
        std::unique_lock lock(m_mutex);
        m_cache.emplace(digest, e);
        return e;
    }

    void put(const AuditExchange& e)
    {
        std::unique_lock lock(m_mutex);
        write_file(path_for(e.request_digest), encode(e));
        m_cache.insert_or_assign(e.request_digest, e);
    }

private:
    std::filesystem::path m_dir;
    mutable std::shared_mutex m_mutex;
    mutable std::map<std::string, AuditExchange> m_cache;
};

// ---- transport -----------------------------------------------------------------------------

struct HttpResponse
{
    int status = 0;
    std::string body;
};

// Thrown by transports for connection-level failures (no HTTP status).
class NetworkFailure : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class HttpTransport
{
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const std::string& url, const std::string& body, const httplib::Headers& headers,
                              double timeout_s) = 0;
};

struct SplitUrl
{
    std::string base; // scheme://host[:port]
    std::string path;
};

inline SplitUrl split_url(const std::string& url)
{
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("endpoint URL needs a scheme: '" + url + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos)
        return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport : public HttpTransport
{
public:
    HttpResponse post(const std::string& url, const std::string& body, const httplib::Headers& headers,
                      double timeout_s) override
    {
        const auto [base, path] = split_url(url);
        httplib::Client cli(base);
        const auto usec = std::chrono::microseconds(static_cast<long long>(timeout_s * 1e6));
        cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(usec).count(),
                                   static_cast<time_t>(usec.count() % 1000000));
        cli.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(usec).count(),
                             static_cast<time_t>(usec.count() % 1000000));
        cli.set_write_timeout(std::chrono::duration_cast<std::chrono::seconds>(usec).count(),
                              static_cast<time_t>(usec.count() % 1000000));
        auto res = cli.Post(path, headers, body, "application/json");
        if (!res)
            throw NetworkFailure("request to " + base + " failed: " + httplib::to_string(res.error()));
        return {res->status, res->body};
    }
};

// ---- client ---------------------------------------------------------------------------------

class VlmClient
{
public:
    explicit VlmClient(ClientConfig config, std::shared_ptr<HttpTransport> transport = nullptr)
        : m_config(std::move(config))
        , m_transport(transport ? std::move(transport) : std::make_shared<HttplibTransport>())
        , m_slots(static_cast<std::ptrdiff_t>(std::min<std::size_t>(m_config.max_in_flight, kMaxSlots)))
    {
        check_client_config(m_config);
        if (m_config.mode != ClientMode::live)
            m_store.emplace(m_config.fixtures);
    }

    const ClientConfig& config() const { return m_config; }
    // Total HTTP attempts issued by this client.
    std::size_t attempts() const { return m_attempts.load(); }

    std::string audit_image(std::string_view image_bytes, const std::string& prompt)
    {
        if (image_bytes.empty())
            throw ConfigError("audit image is empty");
        const std::string digest = request_digest(image_bytes, prompt);

        if (m_config.mode == ClientMode::replay)
        {
            auto e = m_store->find(digest);
            if (!e)
                throw FixtureMissing(digest);
            return e->response_text;
        }

        std::string response = send_with_retries(image_bytes, prompt);
        if (m_config.mode == ClientMode::record)
            m_store->put(AuditExchange{digest, sha256_hex(prompt), response, utc_timestamp()});
        return response;
    }

private:
    static constexpr std::size_t kMaxSlots = 256;

    static bool transient(int status) { return status == 429 || status >= 500; }

    httplib::Headers headers() const
    {
        httplib::Headers h;
        if (!m_config.auth_token_source.empty())
        {
            const char* token = std::getenv(m_config.auth_token_source.c_str());
            if (token == nullptr || *token == '\0')
                throw ConfigError("environment variable " + m_config.auth_token_source + " is not set");
            h.emplace("Authorization", std::string("Bearer ") + token);
        }
        return h;
    }

    std::string send_with_retries(std::string_view image_bytes, const std::string& prompt)
    {
        const std::string body = nlohmann::json{{"prompt", prompt}, {"image_b64", base64_encode(image_bytes)}}.dump();
        const auto hdrs = headers();

        struct SlotGuard
        {
            std::counting_semaphore<kMaxSlots>& s;
            explicit SlotGuard(std::counting_semaphore<kMaxSlots>& sem)
                : s(sem)
            {
                s.acquire();
            }
            ~SlotGuard() { s.release(); }
        } guard(m_slots);

        std::string last_failure;
        int last_status = 0;
        for (int attempt = 0; attempt <= m_config.max_retries; ++attempt)
        {
            if (attempt > 0)
            {
                const double delay =
                    std::min(m_config.backoff_initial * std::pow(2.0, attempt - 1), m_config.timeout);
                std::this_thread::sleep_for(std::chrono::duration<double>(delay));
            }
            ++m_attempts;
            try
            {
                HttpResponse r = m_transport->post(m_config.endpoint_url, body, hdrs, m_config.timeout);
                if (r.status >= 200 && r.status < 300)
                    return std::move(r.body);
                if (!transient(r.status))
                    throw ServiceError(r.status);
                last_status = r.status;
                last_failure.clear();
            }
            catch (const NetworkFailure& e)
            {
                last_failure = e.what();
                last_status = 0;
            }
        }
        if (last_status != 0)
            throw ServiceError(last_status);
        throw TransportError(last_failure + " (after " + std::to_string(m_config.max_retries + 1) + " attempts)",
                             m_config.max_retries + 1);
    }

    ClientConfig m_config;
    std::shared_ptr<HttpTransport> m_transport;
    std::optional<FixtureStore> m_store;
    std::counting_semaphore<kMaxSlots> m_slots;
    std::atomic<std::size_t> m_attempts{0};
};

} // namespace safeedit
