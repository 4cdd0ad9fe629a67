#pragma once

// SpectrumTrace serialization.
//
// CSV is long format, one row per (path, frequency), header
// `freq_hz,re,im,path,label`. Numbers are written with 17 significant digits
// so a write/read cycle reproduces every double bit for bit. The JSON mirror
// carries the same data plus the synthesis metadata (noise_sigma, flux).

#include <filesystem>
#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "mzq/components.hpp"

namespace mzq {

inline constexpr const char* kTraceCsvHeader = "freq_hz,re,im,path,label";

void write_trace_csv(const SpectrumTrace& trace, std::ostream& out);
// Throws Error(Parse) naming the offending line.
SpectrumTrace read_trace_csv(std::istream& in);

nlohmann::ordered_json trace_to_json(const SpectrumTrace& trace);
SpectrumTrace trace_from_json(const nlohmann::json& j);

// Dispatches on the file extension (.csv or .json).
void save_trace(const SpectrumTrace& trace, const std::filesystem::path& file);
SpectrumTrace load_trace(const std::filesystem::path& file);

// "%.17g" formatting shared by every CSV writer in the project.
std::string format_double(double v);
// Whole-string strict parse; returns false on any trailing garbage.
bool parse_double(std::string_view text, double& out);

}  // namespace mzq
