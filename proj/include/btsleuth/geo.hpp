#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "btsleuth/discovery.hpp"

namespace httplib {
class Client;
}

namespace btsleuth {

struct GeoRow {
    std::string country;
    std::string city;
    std::string isp;

    bool operator==(const GeoRow&) const = default;
};

// Lookup source for external addresses. lookup returns nullopt when the
// provider has no data for the address and throws Error for transport-level
// failures; geolocate turns both into annotations rather than aborting.
class GeoProvider {
public:
    virtual ~GeoProvider() = default;
    virtual const char* name() const = 0;
    virtual std::optional<GeoRow> lookup(const std::array<std::uint8_t, 4>& ip) = 0;
};

struct GeoAnnotation {
    std::array<std::uint8_t, 4> ip{};
    std::vector<PeerId> peers;  // identities observed behind this address
    std::string country;
    std::string city;
    std::string isp;
    std::string provider;
    std::string note;  // empty on success, the failure reason otherwise

    bool operator==(const GeoAnnotation&) const = default;
};

// One annotation per distinct external IP, ordered by address; each address
// is looked up once no matter how many peers sit behind it.
std::vector<GeoAnnotation> geolocate(const std::vector<PeerRecord>& peers, GeoProvider& provider);

// CSV table with the header `ip,country,city,isp`. Fields are plain text
// without embedded commas; rows with a malformed address or field count are
// rejected at load time.
class OfflineGeoTable final : public GeoProvider {
public:
    static OfflineGeoTable from_csv_file(const std::filesystem::path& path);
    static OfflineGeoTable from_csv_text(std::string_view text);

    const char* name() const override { return "offline-table"; }
    std::optional<GeoRow> lookup(const std::array<std::uint8_t, 4>& ip) override;

    std::size_t size() const { return rows_.size(); }

private:
    std::map<std::array<std::uint8_t, 4>, GeoRow> rows_;
};

// GET `{path_prefix}{dotted-ip}` against a JSON geolocation service; the
// response fields are picked via the configured keys. 404 means no data;
// any other failure throws.
class HttpGeoProvider final : public GeoProvider {
public:
    struct Options {
        std::string host = "127.0.0.1";
        int port = 80;
        std::string path_prefix = "/json/";
        std::string country_key = "country";
        std::string city_key = "city";
        std::string isp_key = "isp";
        int timeout_ms = 3000;
        std::string label = "http-geo";
    };

    HttpGeoProvider() : HttpGeoProvider(Options{}) {}
    explicit HttpGeoProvider(Options options);
    ~HttpGeoProvider() override;

    const char* name() const override { return options_.label.c_str(); }
    std::optional<GeoRow> lookup(const std::array<std::uint8_t, 4>& ip) override;

private:
    Options options_;
    std::unique_ptr<httplib::Client> client_;
};

}  // namespace btsleuth
