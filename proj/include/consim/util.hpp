#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace consim {

/// Raised when a packaged data file (character, scenario, prompt) is missing
/// or fails its own validation.
class CorruptBundledData : public std::runtime_error {
public:
    CorruptBundledData(const std::string& file, const std::string& why)
        : std::runtime_error(file + ": " + why), file_(file) {}
    const std::string& file() const { return file_; }

private:
    std::string file_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);

/// Collapses runs of whitespace to single spaces and trims the ends.
std::string collapse_ws(std::string_view s);

std::vector<std::string> split_lines(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

std::string iso8601_utc_now();

/// Fixed-point formatting ("%.<decimals>f"), used for CSV cells.
std::string format_fixed(double value, int decimals);

/// Root of the packaged data tree (characters/, scenarios/, prompts/).
/// Resolution order: CONSIM_DATA_DIR env var, then the compiled-in default.
std::filesystem::path bundled_data_root();

} // namespace consim
