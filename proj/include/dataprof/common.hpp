#ifndef DATAPROF_COMMON_HPP
#define DATAPROF_COMMON_HPP

#include <charconv>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dataprof {

inline constexpr const char* kVersion = "0.1.0";

// Pipeline stage owning an error; doubles as the process exit code.
enum class Stage : int {
    config = 1,
    ingest = 2,
    training = 3,
    spc = 4,
};

class Error : public std::runtime_error {
public:
    Error(Stage stage, const std::string& message)
        : std::runtime_error(stage_name(stage) + std::string(": ") + message), stage_(stage) {}

    Stage stage() const { return stage_; }
    int exit_code() const { return static_cast<int>(stage_); }

    static const char* stage_name(Stage s) {
        switch (s) {
            case Stage::config: return "config";
            case Stage::ingest: return "ingest";
            case Stage::training: return "training";
            case Stage::spc: return "spc";
        }
        return "unknown";
    }

private:
    Stage stage_;
};

// Strict decimal parse: optional surrounding ASCII whitespace, full
// consumption, finite result. Anything else is nullopt.
std::optional<double> parse_decimal(std::string_view text);

// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

// FNV-1a 64-bit, used for config digests in report headers.
std::uint64_t fnv1a64(std::string_view data);

std::string trim_ascii(std::string_view text);

}  // namespace dataprof

#endif
