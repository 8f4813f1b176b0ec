#pragma once

#include <filesystem>
#include <span>
#include <string>

namespace pqla {

/// Histogram (density scale) with the N(0, 1) density overlaid.
std::string svg_histogram(std::span<const double> values, std::size_t bins, const std::string& title);

/// Normal QQ-plot: sorted values against N(0, 1) plotting-position quantiles.
std::string svg_qq_plot(std::span<const double> values, const std::string& title);

/// Log-log scatter of (x, y), points with x <= 0 or y <= 0 dropped.
std::string svg_loglog(std::span<const double> x, std::span<const double> y, const std::string& title,
                       const std::string& x_label, const std::string& y_label);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace pqla
