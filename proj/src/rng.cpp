#include "credassign/rng.hpp"

#include <cstring>
#include <sstream>

namespace credassign {

std::string Rng::state_string() const {
    std::ostringstream os;
    os << gen_;
    os << " " << (has_spare_ ? 1 : 0);
    if (has_spare_) {
        // Bit-exact round trip; textual floats would lose the cached value.
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(spare_));
        std::memcpy(&bits, &spare_, sizeof(bits));
        os << " " << bits;
    }
    return os.str();
}

void Rng::set_state_string(const std::string& s) {
    std::istringstream is(s);
    is >> gen_;
    int flag = 0;
    is >> flag;
    has_spare_ = flag != 0;
    spare_ = 0.0;
    if (has_spare_) {
        std::uint64_t bits = 0;
        is >> bits;
        std::memcpy(&spare_, &bits, sizeof(bits));
    }
    if (is.fail()) throw FormatError("malformed rng state string");
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    return splitmix64(seed ^ fnv1a64(tag));
}

} // namespace credassign
