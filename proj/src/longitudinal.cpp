#include "morph/longitudinal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "morph/errors.hpp"

namespace morph::longi {

const char* to_string(Group g) { return g == Group::cdr0 ? "CDR0" : "CDR0.5"; }
const char* to_string(Side s) { return s == Side::left ? "L" : "R"; }
const char* to_string(Timepoint t) { return t == Timepoint::baseline ? "B" : "F"; }

std::size_t MorphTable::count(Group g) const {
    std::size_t c = 0;
    for (const auto& s : subjects)
        if (s.group == g) ++c;
    return c;
}

namespace {

const std::array<std::string, 18> kColumns = {
    "subject_id",  "group",     "gender",   "age_years", "education_years",
    "scan_interval_years", "bv_base", "bv_follow", "icv_base", "icv_follow",
    "hv_lb",       "hv_lf",     "hv_rb",    "hv_rf",     "d_lb",
    "d_lf",        "d_rb",      "d_rf"};

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_number(const std::string& s, long row, const std::string& column) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || !std::isfinite(v)) {
        std::ostringstream msg;
        msg << "row " << row << ": column " << column << " is not a finite number: \"" << s
            << "\"";
        throw ValueError(row, msg.str());
    }
    return v;
}

double parse_positive(const std::string& s, long row, const std::string& column) {
    const double v = parse_number(s, row, column);
    if (!(v > 0.0)) {
        std::ostringstream msg;
        msg << "row " << row << ": column " << column << " must be positive, got " << s;
        throw ValueError(row, msg.str());
    }
    return v;
}

} // namespace

MorphTable load_table(std::istream& in, const std::string& name) {
    std::string line;
    if (!std::getline(in, line)) throw EmptyTable(name + ": empty file");
    const auto header = split_csv(line);
    for (const auto& col : kColumns) {
        if (std::find(header.begin(), header.end(), col) == header.end())
            throw SchemaError(col, name + ": missing column \"" + col + "\"");
    }
    // Column positions by name; extra columns are ignored.
    std::array<std::size_t, 18> pos{};
    for (std::size_t c = 0; c < kColumns.size(); ++c)
        pos[c] = std::size_t(std::find(header.begin(), header.end(), kColumns[c]) -
                             header.begin());

    MorphTable table;
    long row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv(line);
        if (cells.size() < header.size()) {
            std::ostringstream msg;
            msg << "row " << row << ": expected " << header.size() << " cells, got "
                << cells.size();
            throw ValueError(row, msg.str());
        }
        auto cell = [&](std::size_t c) -> const std::string& { return cells[pos[c]]; };

        SubjectRecord rec;
        rec.subject_id = cell(0);
        if (rec.subject_id.empty()) throw ValueError(row, "row " + std::to_string(row) + ": empty subject_id");
        const std::string& grp = cell(1);
        if (grp == "CDR0") {
            rec.group = Group::cdr0;
        } else if (grp == "CDR0.5") {
            rec.group = Group::cdr05;
        } else {
            throw ValueError(row, "row " + std::to_string(row) +
                                      ": group must be CDR0 or CDR0.5, got \"" + grp + "\"");
        }
        const std::string& gen = cell(2);
        if (gen == "M") {
            rec.gender = Gender::male;
        } else if (gen == "F") {
            rec.gender = Gender::female;
        } else {
            throw ValueError(row, "row " + std::to_string(row) +
                                      ": gender must be M or F, got \"" + gen + "\"");
        }
        rec.age_years = parse_number(cell(3), row, "age_years");
        rec.education_years = parse_number(cell(4), row, "education_years");
        rec.scan_interval_years = parse_positive(cell(5), row, "scan_interval_years");
        rec.brain_volume[0] = parse_positive(cell(6), row, "bv_base");
        rec.brain_volume[1] = parse_positive(cell(7), row, "bv_follow");
        rec.icv[0] = parse_positive(cell(8), row, "icv_base");
        rec.icv[1] = parse_positive(cell(9), row, "icv_follow");
        rec.hippo_volume[0][0] = parse_positive(cell(10), row, "hv_lb");
        rec.hippo_volume[0][1] = parse_positive(cell(11), row, "hv_lf");
        rec.hippo_volume[1][0] = parse_positive(cell(12), row, "hv_rb");
        rec.hippo_volume[1][1] = parse_positive(cell(13), row, "hv_rf");
        rec.metric_distance[0][0] = parse_number(cell(14), row, "d_lb");
        rec.metric_distance[0][1] = parse_number(cell(15), row, "d_lf");
        rec.metric_distance[1][0] = parse_number(cell(16), row, "d_rb");
        rec.metric_distance[1][1] = parse_number(cell(17), row, "d_rf");
        for (int s = 0; s < 2; ++s)
            for (int t = 0; t < 2; ++t)
                if (rec.metric_distance[s][t] < 0.0)
                    throw ValueError(row, "row " + std::to_string(row) +
                                              ": metric distances must be nonnegative");
        table.subjects.push_back(std::move(rec));
    }
    if (table.subjects.empty()) throw EmptyTable(name + ": no data rows");
    return table;
}

MorphTable load_table_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(path + ": cannot open");
    return load_table(in, path);
}

void write_table(const MorphTable& table, std::ostream& out) {
    for (std::size_t c = 0; c < kColumns.size(); ++c)
        out << kColumns[c] << (c + 1 < kColumns.size() ? ',' : '\n');
    out.precision(17);
    for (const auto& r : table.subjects) {
        out << r.subject_id << ',' << to_string(r.group) << ','
            << (r.gender == Gender::male ? 'M' : 'F') << ',' << r.age_years << ','
            << r.education_years << ',' << r.scan_interval_years << ',' << r.brain_volume[0]
            << ',' << r.brain_volume[1] << ',' << r.icv[0] << ',' << r.icv[1];
        for (int s = 0; s < 2; ++s)
            for (int t = 0; t < 2; ++t) out << ',' << r.hippo_volume[s][t];
        for (int s = 0; s < 2; ++s)
            for (int t = 0; t < 2; ++t) out << ',' << r.metric_distance[s][t];
        out << '\n';
    }
}

std::vector<LongRow> to_long(const MorphTable& table, Measure measure) {
    std::vector<LongRow> rows;
    rows.reserve(table.size() * 4);
    for (const auto& rec : table.subjects) {
        for (Side s : {Side::left, Side::right})
            for (Timepoint t : {Timepoint::baseline, Timepoint::followup}) {
                const double v =
                    measure == Measure::distance ? rec.distance(s, t) : rec.volume(s, t);
                rows.push_back({rec.subject_id, rec.group, s, t, v});
            }
    }
    return rows;
}

MorphTable regroup(const MorphTable& source, const std::vector<LongRow>& rows,
                   Measure measure) {
    if (rows.size() != source.size() * 4)
        throw DimensionMismatch("long rows do not match table size");
    MorphTable out = source;
    for (std::size_t i = 0; i < out.subjects.size(); ++i) {
        for (std::size_t k = 0; k < 4; ++k) {
            const LongRow& r = rows[i * 4 + k];
            if (r.subject_id != out.subjects[i].subject_id)
                throw DimensionMismatch("long rows out of order");
            auto& cells = measure == Measure::distance ? out.subjects[i].metric_distance
                                                       : out.subjects[i].hippo_volume;
            cells[std::size_t(r.side)][std::size_t(r.timepoint)] = r.value;
        }
    }
    return out;
}

std::array<double, 2> apc_volume(const SubjectRecord& rec) {
    std::array<double, 2> out{};
    for (int s = 0; s < 2; ++s) {
        const double vb = rec.hippo_volume[std::size_t(s)][0];
        const double vf = rec.hippo_volume[std::size_t(s)][1];
        out[std::size_t(s)] = (vb - vf) / (vb * rec.scan_interval_years) * 100.0;
    }
    return out;
}

std::array<double, 2> apc_distance(const SubjectRecord& rec) {
    std::array<double, 2> out{};
    for (int s = 0; s < 2; ++s) {
        const double db = rec.metric_distance[std::size_t(s)][0];
        const double df = rec.metric_distance[std::size_t(s)][1];
        if (db == 0.0) throw DegenerateBaseline("zero baseline distance for subject " +
                                                rec.subject_id);
        out[std::size_t(s)] = (df - db) / (db * rec.scan_interval_years) * 100.0;
    }
    return out;
}

std::vector<ApcRecord> apc_records(const MorphTable& table) {
    std::vector<ApcRecord> out;
    out.reserve(table.size());
    for (const auto& rec : table.subjects) {
        ApcRecord a;
        a.subject_id = rec.subject_id;
        a.group = rec.group;
        a.v_apc = apc_volume(rec);
        a.d_apc = apc_distance(rec);
        out.push_back(std::move(a));
    }
    return out;
}

} // namespace morph::longi
