#ifndef GLUON_CORE_HPP
#define GLUON_CORE_HPP

#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gluon {

// Pipeline stages, used to tag errors so the CLI can report where a run died
// and pick the right exit code.
enum class Stage {
    config,
    models,
    atlas,
    gluing,
    momentum,
    lichnerowicz,
    verification,
    probes,
    io
};

inline const char* stage_name(Stage s) {
    switch (s) {
        case Stage::config:        return "config";
        case Stage::models:        return "models";
        case Stage::atlas:         return "atlas";
        case Stage::gluing:        return "gluing";
        case Stage::momentum:      return "momentum";
        case Stage::lichnerowicz:  return "lichnerowicz";
        case Stage::verification:  return "verification";
        case Stage::probes:        return "probes";
        case Stage::io:            return "io";
    }
    return "?";
}

// Exit-code conventions for the CLI: 2 config, 3 degeneracy refusal,
// 4 solver failure, 5 verification failure.
struct Error : std::runtime_error {
    Stage stage;
    int exit_code;
    Error(Stage s, int code, const std::string& msg)
        : std::runtime_error(msg), stage(s), exit_code(code) {}
};

[[noreturn]] inline void fail(Stage s, int code, const std::string& msg) {
    throw Error(s, code, msg);
}

inline double sq(double x) { return x * x; }

// xoshiro256** with splitmix64 seeding.  Fully deterministic across
// platforms; std::mt19937_64 would do, but the standard distributions are
// implementation-defined, which would break byte-reproducible outputs.
struct Rng {
    uint64_t s[4];

    explicit Rng(uint64_t seed = 1) {
        uint64_t x = seed;
        for (auto& si : s) {
            x += 0x9e3779b97f4a7c15ull;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
            si = z ^ (z >> 31);
        }
    }

    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t next() {
        uint64_t result = rotl(s[1] * 5, 7) * 9;
        uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }

    double uniform() { return double(next() >> 11) * 0x1.0p-53; }  // [0,1)
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    int uniform_int(int n) { return int(next() % uint64_t(n)); }   // small n only
};

}  // namespace gluon

#endif
