#include "btsleuth/geo.hpp"

#include <fstream>
#include <httplib.h>
#include <json.hpp>
#include <set>
#include <sstream>

namespace btsleuth {

namespace {

std::string dotted(const std::array<std::uint8_t, 4>& ip) {
    std::string out;
    for (int i = 0; i < 4; ++i) {
        if (i) out += '.';
        out += std::to_string(ip[i]);
    }
    return out;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

std::vector<GeoAnnotation> geolocate(const std::vector<PeerRecord>& peers, GeoProvider& provider) {
    std::map<std::array<std::uint8_t, 4>, std::set<PeerId>> behind;
    for (const PeerRecord& r : peers) behind[r.external.ip].insert(r.peer);

    std::vector<GeoAnnotation> out;
    out.reserve(behind.size());
    for (const auto& [ip, ids] : behind) {
        GeoAnnotation a;
        a.ip = ip;
        a.peers.assign(ids.begin(), ids.end());
        a.provider = provider.name();
        try {
            if (auto row = provider.lookup(ip)) {
                a.country = row->country;
                a.city = row->city;
                a.isp = row->isp;
            } else {
                a.note = "no entry for " + dotted(ip);
            }
        } catch (const Error& e) {
            a.note = e.what();
        }
        out.push_back(std::move(a));
    }
    return out;
}

OfflineGeoTable OfflineGeoTable::from_csv_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot read geo table " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_csv_text(buf.str());
}

OfflineGeoTable OfflineGeoTable::from_csv_text(std::string_view text) {
    OfflineGeoTable table;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "ip,country,city,isp") {
                throw Error(Errc::unrecognized_input, "geo table header must be ip,country,city,isp");
            }
            continue;
        }
        auto fields = split_fields(line);
        if (fields.size() != 4) {
            throw Error(Errc::unrecognized_input,
                        "geo table line " + std::to_string(line_no) + " has " +
                            std::to_string(fields.size()) + " fields, wants 4");
        }
        std::array<std::uint8_t, 4> ip{};
        try {
            ip = parse_ip4(fields[0]);
        } catch (const Error&) {
            throw Error(Errc::unrecognized_input,
                        "geo table line " + std::to_string(line_no) + ": bad address " + fields[0]);
        }
        table.rows_[ip] = GeoRow{fields[1], fields[2], fields[3]};
    }
    if (line_no == 0) throw Error(Errc::unrecognized_input, "geo table is empty");
    return table;
}

std::optional<GeoRow> OfflineGeoTable::lookup(const std::array<std::uint8_t, 4>& ip) {
    auto it = rows_.find(ip);
    if (it == rows_.end()) return std::nullopt;
    return it->second;
}

HttpGeoProvider::HttpGeoProvider(Options options) : options_(std::move(options)) {
    client_ = std::make_unique<httplib::Client>(options_.host, options_.port);
    client_->set_connection_timeout(0, options_.timeout_ms * 1000);
    client_->set_read_timeout(0, options_.timeout_ms * 1000);
}

HttpGeoProvider::~HttpGeoProvider() = default;

std::optional<GeoRow> HttpGeoProvider::lookup(const std::array<std::uint8_t, 4>& ip) {
    auto res = client_->Get(options_.path_prefix + dotted(ip));
    if (!res) {
        throw Error(Errc::timeout, options_.label + ": " + httplib::to_string(res.error()));
    }
    if (res->status == 404) return std::nullopt;
    if (res->status != 200) {
        throw Error(Errc::protocol_error,
                    options_.label + " answered status " + std::to_string(res->status));
    }
    nlohmann::json body;
    try {
        body = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(Errc::protocol_error, options_.label + " sent unparseable JSON: " + e.what());
    }
    GeoRow row;
    row.country = body.value(options_.country_key, "");
    row.city = body.value(options_.city_key, "");
    row.isp = body.value(options_.isp_key, "");
    return row;
}

}  // namespace btsleuth
