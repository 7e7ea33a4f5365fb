#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "scenecast/experiment.hpp"

namespace scenecast::report {

/// Grouped bars (one group per test year, one bar per model or scenario)
/// with CI whiskers, for one city.
void write_rmse_chart(std::ostream& out, const std::string& city, const std::string& hash,
                      const std::vector<experiment::SummaryRow>& rows);

/// Per-FSA mean RMSE bars for one label, coloured by region.
void write_fsa_chart(std::ostream& out, const std::string& city, const std::string& label,
                     const std::string& hash, const std::vector<experiment::FsaRow>& rows);

/// Label with the lowest pooled mean RMSE for the city.
std::string best_label(const std::string& city, const std::vector<experiment::SummaryRow>& rows);

/// File-name-safe version of a city or label.
std::string slug(const std::string& text);

}  // namespace scenecast::report
