#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "btsleuth/bytes.hpp"
#include "btsleuth/errors.hpp"

namespace btsleuth {

// One bencoded value: byte-string, signed 64-bit integer, list, or
// dictionary. Dictionaries are kept in canonical form: unique keys in
// strictly ascending byte order.
class BValue {
public:
    enum class Type { byte_string, integer, list, dict };

    using List = std::vector<BValue>;
    using Dict = std::vector<std::pair<Bytes, BValue>>;  // sorted by key

    BValue() : type_(Type::byte_string) {}

    static BValue string(std::string_view s) { return BValue(bytes_of(s)); }
    static BValue string(Bytes b) { return BValue(std::move(b)); }
    static BValue string(std::span<const std::uint8_t> b) {
        return BValue(Bytes(b.begin(), b.end()));
    }
    static BValue integer(std::int64_t v) {
        BValue out;
        out.type_ = Type::integer;
        out.int_ = v;
        return out;
    }
    static BValue list(List items = {}) {
        BValue out;
        out.type_ = Type::list;
        out.list_ = std::move(items);
        return out;
    }
    static BValue dict() {
        BValue out;
        out.type_ = Type::dict;
        return out;
    }

    Type type() const { return type_; }
    bool is_string() const { return type_ == Type::byte_string; }
    bool is_integer() const { return type_ == Type::integer; }
    bool is_list() const { return type_ == Type::list; }
    bool is_dict() const { return type_ == Type::dict; }

    // Accessors throw Errc::protocol_error on a type mismatch.
    const Bytes& as_string() const;
    std::int64_t as_integer() const;
    const List& as_list() const;
    List& as_list();
    const Dict& as_dict() const;

    // Dict access. set() replaces an existing key; insertion keeps keys sorted.
    void set(std::string_view key, BValue v);
    void set(const Bytes& key, BValue v);
    const BValue* find(std::string_view key) const;

    void push_back(BValue v);

    bool operator==(const BValue& other) const;
    bool operator!=(const BValue& other) const { return !(*this == other); }

private:
    explicit BValue(Bytes s) : type_(Type::byte_string), str_(std::move(s)) {}

    Type type_;
    Bytes str_;
    std::int64_t int_ = 0;
    List list_;
    Dict dict_;
};

struct BDecoded {
    BValue value;
    std::size_t consumed = 0;
    // False when the input deviates from canonical form (unsorted dict keys,
    // leading zeros in a string length). Captured traffic may legitimately
    // deviate; the evidence layer records the verbatim octets regardless.
    bool canonical = true;
};

// Canonical bencoding: i<decimal>e, <len>:<bytes>, l...e, d...e with
// ascending keys. Total over all BValues.
Bytes encode_bvalue(const BValue& v);

// Decodes one value from the front of `in`. Trailing octets are left for the
// caller; `consumed` reports how far decoding advanced. Never reads past the
// input. Throws CodecError{malformed_bencoding} with the offending offset.
BDecoded decode_bvalue(std::span<const std::uint8_t> in);

}  // namespace btsleuth
