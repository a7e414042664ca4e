#ifndef ROINET_CSVREPORT_HPP
#define ROINET_CSVREPORT_HPP

#include <string>
#include <vector>

#include "roinet/metrics.hpp"

namespace roinet {

// Appends one row to the metrics CSV, writing the header only when the file
// is new or empty. Schema: method,seed,accuracy,mean_pixel_acc,mean_iou,
// n_test. Floats carry 4 decimals; negative metric fields render as empty
// cells (metric not produced by that evaluation).
void append_metrics_csv(const std::string& path, const MetricsReport& report);

std::vector<MetricsReport> read_metrics_csv(const std::string& path);

// Fixed-width text table over the parsed rows.
std::string render_metrics_table(const std::vector<MetricsReport>& rows);

}  // namespace roinet

#endif  // ROINET_CSVREPORT_HPP
