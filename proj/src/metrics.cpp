#include "cola/metrics.hpp"

#include <charconv>

namespace cola {

namespace {

void append_double(std::string& s, double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    s.append(buf, res.ptr);
}

} // namespace

std::string metric_json_line(const MetricPoint& p) {
    std::string s = "{\"iter\":" + std::to_string(p.iter) + ",\"epoch\":" + std::to_string(p.epoch) +
                    ",\"split\":\"" + p.split + "\"";
    if (p.user >= 0) s += ",\"user\":" + std::to_string(p.user);
    s += ",\"loss\":";
    append_double(s, p.loss);
    s += ",\"accuracy\":";
    append_double(s, p.accuracy);
    s += ",\"wall_s\":";
    append_double(s, p.wall_s);
    s += "}";
    return s;
}

MetricsWriter::MetricsWriter(const std::string& path) : out_(path) {
    if (!out_) throw ConfigError("cannot open metrics file " + path);
}

void MetricsWriter::write(const MetricPoint& p) { out_ << metric_json_line(p) << "\n"; }

void MetricsWriter::flush() { out_.flush(); }

} // namespace cola
