#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace octopus {

/// One recorded ballot event.
struct BallotEvent {
    std::int64_t timestamp_sec = 0;
    int task_id = 0;
    int worker_id = 0;
    int label = 0;      // 0/1
    int pay_level = 0;  // index into the configured pay grid
};

/// Time-ordered ballot log. Simultaneous events are ordered by (task_id, worker_id).
struct BallotTrace {
    std::vector<BallotEvent> events;

    void validate(int pay_levels = -1) const {
        std::int64_t prev = std::numeric_limits<std::int64_t>::min();
        for (std::size_t i = 0; i < events.size(); ++i) {
            const auto& e = events[i];
            if (e.timestamp_sec < prev)
                throw std::invalid_argument("BallotTrace: timestamps must be nondecreasing (event " +
                                            std::to_string(i) + ")");
            if (e.label != 0 && e.label != 1)
                throw std::invalid_argument("BallotTrace: label must be 0 or 1 (event " +
                                            std::to_string(i) + ")");
            if (e.pay_level < 0 || (pay_levels >= 0 && e.pay_level >= pay_levels))
                throw std::invalid_argument("BallotTrace: pay_level out of range (event " +
                                            std::to_string(i) + ")");
            prev = e.timestamp_sec;
        }
    }

    void sort() {
        std::stable_sort(events.begin(), events.end(), [](const BallotEvent& a, const BallotEvent& b) {
            if (a.timestamp_sec != b.timestamp_sec) return a.timestamp_sec < b.timestamp_sec;
            if (a.task_id != b.task_id) return a.task_id < b.task_id;
            return a.worker_id < b.worker_id;
        });
    }
};

inline const char* kTraceCsvHeader = "timestamp_sec,task_id,worker_id,label,pay_level";

inline void write_trace_csv(const BallotTrace& trace, std::ostream& out) {
    out << kTraceCsvHeader << "\n";
    for (const auto& e : trace.events)
        out << e.timestamp_sec << ',' << e.task_id << ',' << e.worker_id << ',' << e.label << ','
            << e.pay_level << "\n";
}

inline void write_trace_csv(const BallotTrace& trace, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    write_trace_csv(trace, f);
}

/// Parses the ballot-trace CSV format. Errors report 1-based line numbers.
inline BallotTrace read_trace_csv(std::istream& in) {
    BallotTrace trace;
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw std::invalid_argument("trace csv line " + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1) {
            if (line != kTraceCsvHeader) fail("expected header '" + std::string(kTraceCsvHeader) + "'");
            continue;
        }
        std::istringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 5) fail("expected 5 fields, got " + std::to_string(fields.size()));
        BallotEvent e;
        try {
            std::size_t pos;
            e.timestamp_sec = std::stoll(fields[0], &pos);
            if (pos != fields[0].size()) throw std::invalid_argument("");
            e.task_id = std::stoi(fields[1], &pos);
            if (pos != fields[1].size()) throw std::invalid_argument("");
            e.worker_id = std::stoi(fields[2], &pos);
            if (pos != fields[2].size()) throw std::invalid_argument("");
            e.label = std::stoi(fields[3], &pos);
            if (pos != fields[3].size()) throw std::invalid_argument("");
            e.pay_level = std::stoi(fields[4], &pos);
            if (pos != fields[4].size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            fail("malformed integer field");
        }
        trace.events.push_back(e);
    }
    trace.validate();
    return trace;
}

inline BallotTrace read_trace_csv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    return read_trace_csv(f);
}

}  // namespace octopus
