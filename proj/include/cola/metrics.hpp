#pragma once

#include <fstream>
#include <string>

#include "cola/engine.hpp"

namespace cola {

// One JSON object per line: {"iter":..,"epoch":..,"split":"..","loss":..,
// "accuracy":..,"wall_s":..} plus "user" for per-user rows. Number formatting
// is shortest-round-trip, so identical runs produce identical bytes.
std::string metric_json_line(const MetricPoint& p);

class MetricsWriter {
public:
    explicit MetricsWriter(const std::string& path);
    void write(const MetricPoint& p);
    void flush();

private:
    std::ofstream out_;
};

} // namespace cola
