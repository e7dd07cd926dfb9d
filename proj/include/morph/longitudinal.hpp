#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace morph::longi {

enum class Group { cdr0, cdr05 };
enum class Gender { male, female };
enum class Side { left, right };
enum class Timepoint { baseline, followup };

const char* to_string(Group g);
const char* to_string(Side s);
const char* to_string(Timepoint t);

/// One subject row: four hippocampal volumes and four metric distances keyed
/// (side, timepoint), plus demographics and whole-brain volumes.
struct SubjectRecord {
    std::string subject_id;
    Group group = Group::cdr0;
    Gender gender = Gender::male;
    double age_years = 0.0;
    double education_years = 0.0;
    double scan_interval_years = 0.0;
    std::array<double, 2> brain_volume{};             // baseline, followup (mm^3)
    std::array<double, 2> icv{};                      // baseline, followup (mm^3)
    std::array<std::array<double, 2>, 2> hippo_volume{}; // [side][time] mm^3
    std::array<std::array<double, 2>, 2> metric_distance{}; // [side][time]

    double volume(Side s, Timepoint t) const {
        return hippo_volume[std::size_t(s)][std::size_t(t)];
    }
    double distance(Side s, Timepoint t) const {
        return metric_distance[std::size_t(s)][std::size_t(t)];
    }
};

struct MorphTable {
    std::vector<SubjectRecord> subjects;

    std::size_t size() const { return subjects.size(); }
    std::size_t count(Group g) const;
};

/// Exact CSV schema, header required:
/// subject_id,group,gender,age_years,education_years,scan_interval_years,
/// bv_base,bv_follow,icv_base,icv_follow,hv_lb,hv_lf,hv_rb,hv_rf,
/// d_lb,d_lf,d_rb,d_rf
MorphTable load_table(std::istream& in, const std::string& name = "<stream>");
MorphTable load_table_file(const std::string& path);
void write_table(const MorphTable& table, std::ostream& out);

enum class Measure { distance, volume };

/// Long-format row; per subject exactly four rows in the fixed order
/// (L,B), (L,F), (R,B), (R,F) — the AR(1) lag structure is defined over
/// exactly this ordering.
struct LongRow {
    std::string subject_id;
    Group group;
    Side side;
    Timepoint timepoint;
    double value;
};

std::vector<LongRow> to_long(const MorphTable& table, Measure measure);

/// Rebuild the per-subject measure cells from long rows (round-trip check).
MorphTable regroup(const MorphTable& source, const std::vector<LongRow>& rows,
                   Measure measure);

/// Annual percentage rates of change, per side.
struct ApcRecord {
    std::string subject_id;
    Group group;
    std::array<double, 2> v_apc{}; // [side], %/year, (Vb - Vf)/(Vb*T)*100
    std::array<double, 2> d_apc{}; // [side], %/year, (df - db)/(db*T)*100
};

/// (Vb - Vf)/(Vb*T)*100 for each side; shrinking volume gives positive APC.
std::array<double, 2> apc_volume(const SubjectRecord& rec);

/// (df - db)/(db*T)*100 for each side; the difference order is flipped
/// against the volume formula so growing distances give positive APC.
std::array<double, 2> apc_distance(const SubjectRecord& rec);

std::vector<ApcRecord> apc_records(const MorphTable& table);

} // namespace morph::longi
