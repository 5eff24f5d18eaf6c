#include <doctest.h>

#include "btsleuth/geo.hpp"

#include <atomic>
#include <httplib.h>
#include <thread>

#include "support.hpp"

using namespace btsleuth;
using namespace btsleuth::testing;

namespace {

const char* kTable =
    "ip,country,city,isp\n"
    "85.0.0.1,DE,Berlin,Telefonica\n"
    "203.0.113.9,AU,Sydney,Telstra\n"
    "198.51.100.7,US,,Example Networks\n";

PeerRecord record_at(Rng& rng, std::array<std::uint8_t, 4> external_ip, std::uint16_t port) {
    PeerRecord r;
    r.peer = peer_id_from(rng);
    r.external = Endpoint6{external_ip, port};
    r.local = endpoint_from(rng);
    return r;
}

class CountingProvider final : public GeoProvider {
public:
    const char* name() const override { return "counting"; }
    std::optional<GeoRow> lookup(const std::array<std::uint8_t, 4>& ip) override {
        ++calls;
        if (ip == std::array<std::uint8_t, 4>{9, 9, 9, 9}) {
            throw Error(Errc::timeout, "upstream gone");
        }
        if (ip[0] == 85) return GeoRow{"DE", "Berlin", "Telefonica"};
        return std::nullopt;
    }
    int calls = 0;
};

}  // namespace

TEST_CASE("the offline table parses the documented csv form") {
    OfflineGeoTable table = OfflineGeoTable::from_csv_text(kTable);
    CHECK(table.size() == 3);

    auto berlin = table.lookup({85, 0, 0, 1});
    REQUIRE(berlin.has_value());
    CHECK(*berlin == GeoRow{"DE", "Berlin", "Telefonica"});

    auto sparse = table.lookup({198, 51, 100, 7});
    REQUIRE(sparse.has_value());
    CHECK(sparse->city == "");
    CHECK(sparse->isp == "Example Networks");

    CHECK_FALSE(table.lookup({1, 2, 3, 4}).has_value());
}

TEST_CASE("malformed tables are rejected at load") {
    auto rejects = [](const char* text) {
        try {
            OfflineGeoTable::from_csv_text(text);
            return false;
        } catch (const Error& e) {
            return e.code() == Errc::unrecognized_input;
        }
    };
    CHECK(rejects("address,country,city,isp\n1.2.3.4,a,b,c\n"));
    CHECK(rejects("ip,country,city,isp\n1.2.3.4,only,three\n"));
    CHECK(rejects("ip,country,city,isp\nnot-an-ip,a,b,c\n"));
    CHECK(rejects(""));

    // blank lines and CRLF endings are tolerated
    OfflineGeoTable ok = OfflineGeoTable::from_csv_text("ip,country,city,isp\r\n\r\n5.6.7.8,FR,Paris,Orange\r\n");
    CHECK(ok.size() == 1);
    CHECK(ok.lookup({5, 6, 7, 8})->city == "Paris");
}

TEST_CASE("annotation covers every distinct address exactly once") {
    Rng rng(1600);
    std::vector<PeerRecord> peers;
    peers.push_back(record_at(rng, {85, 0, 0, 1}, 1001));
    peers.push_back(record_at(rng, {85, 0, 0, 1}, 1002));
    peers.push_back(record_at(rng, {7, 7, 7, 7}, 2000));
    peers.push_back(record_at(rng, {9, 9, 9, 9}, 3000));

    CountingProvider provider;
    auto annotations = geolocate(peers, provider);

    // three distinct addresses, three lookups, addresses in order
    CHECK(provider.calls == 3);
    REQUIRE(annotations.size() == 3);
    CHECK(annotations[0].ip == std::array<std::uint8_t, 4>{7, 7, 7, 7});
    CHECK(annotations[1].ip == std::array<std::uint8_t, 4>{9, 9, 9, 9});
    CHECK(annotations[2].ip == std::array<std::uint8_t, 4>{85, 0, 0, 1});

    CHECK(annotations[0].country == "");
    CHECK(annotations[0].note == "no entry for 7.7.7.7");
    CHECK(annotations[0].provider == "counting");

    CHECK(annotations[1].note == "upstream gone");
    CHECK(annotations[1].country == "");

    CHECK(annotations[2].country == "DE");
    CHECK(annotations[2].city == "Berlin");
    CHECK(annotations[2].isp == "Telefonica");
    CHECK(annotations[2].note == "");
    CHECK(annotations[2].peers.size() == 2);
}

TEST_CASE("the http client reads the configured fields") {
    httplib::Server server;
    server.Get("/json/85.0.0.1", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"country":"DE","city":"Berlin","org":"Telefonica"})", "application/json");
    });
    server.Get("/json/6.6.6.6", [](const httplib::Request&, httplib::Response& res) {
        res.status = 500;
        res.set_content("boom", "text/plain");
    });
    server.Get("/json/7.7.7.7", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("not json {", "application/json");
    });

    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread runner([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpGeoProvider::Options opts;
    opts.host = "127.0.0.1";
    opts.port = port;
    opts.isp_key = "org";
    opts.label = "test-geo";
    HttpGeoProvider provider(opts);

    auto row = provider.lookup({85, 0, 0, 1});
    REQUIRE(row.has_value());
    CHECK(*row == GeoRow{"DE", "Berlin", "Telefonica"});

    CHECK_FALSE(provider.lookup({1, 2, 3, 4}).has_value());  // 404 from the server

    try {
        provider.lookup({6, 6, 6, 6});
        FAIL("status 500 did not throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::protocol_error);
    }
    try {
        provider.lookup({7, 7, 7, 7});
        FAIL("broken json did not throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::protocol_error);
    }

    server.stop();
    runner.join();
}
