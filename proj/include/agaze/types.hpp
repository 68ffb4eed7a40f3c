#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace agaze {

// ---------------------------------------------------------------------------
// Error hierarchy. Every failure surfaces as one of these; the CLI maps them
// to exit code 1 with the message on stderr.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ReferenceError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Age groups and stimulus categories.
// ---------------------------------------------------------------------------

enum class AgeGroup : int { Children = 0, Adults = 1, Elderly = 2 };

inline constexpr std::array<AgeGroup, 3> kAgeGroups{AgeGroup::Children, AgeGroup::Adults,
                                                    AgeGroup::Elderly};

inline const char* to_string(AgeGroup g) {
    switch (g) {
        case AgeGroup::Children: return "children";
        case AgeGroup::Adults: return "adults";
        case AgeGroup::Elderly: return "elderly";
    }
    return "?";
}

inline AgeGroup parse_age_group(const std::string& s) {
    if (s == "children") return AgeGroup::Children;
    if (s == "adults") return AgeGroup::Adults;
    if (s == "elderly") return AgeGroup::Elderly;
    throw ParseError("unknown age group '" + s + "' (expected children|adults|elderly)");
}

inline int index_of(AgeGroup g) { return static_cast<int>(g); }

enum class StimulusCategory : int { Naturals = 0, ManMade = 1, Fractals = 2 };

inline constexpr std::array<StimulusCategory, 3> kCategories{
    StimulusCategory::Naturals, StimulusCategory::ManMade, StimulusCategory::Fractals};

inline const char* to_string(StimulusCategory c) {
    switch (c) {
        case StimulusCategory::Naturals: return "naturals";
        case StimulusCategory::ManMade: return "manmade";
        case StimulusCategory::Fractals: return "fractals";
    }
    return "?";
}

inline StimulusCategory parse_category(const std::string& s) {
    if (s == "naturals") return StimulusCategory::Naturals;
    if (s == "manmade") return StimulusCategory::ManMade;
    if (s == "fractals") return StimulusCategory::Fractals;
    throw ParseError("unknown category '" + s + "' (expected naturals|manmade|fractals)");
}

inline int index_of(StimulusCategory c) { return static_cast<int>(c); }

// 0-based pixel coordinate, x = column, y = row.
struct PixelCoord {
    int x = 0;
    int y = 0;
    bool operator==(const PixelCoord&) const = default;
};

// ---------------------------------------------------------------------------
// Seed derivation. All randomness in the library flows from explicit u64
// seeds; sub-streams are derived with splitmix64 so that parallel work
// ordering cannot change results.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_str(const std::string& s) {
    // FNV-1a 64
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(base ^ splitmix64(stream));
}

inline std::uint64_t derive_seed(std::uint64_t base, const std::string& stream) {
    return derive_seed(base, hash_str(stream));
}

}  // namespace agaze
