#ifndef NAD_COHORT_HPP
#define NAD_COHORT_HPP

#include <map>
#include <set>
#include <string>
#include <vector>

namespace nad::cohort {

enum class LabelClass { positive, negative, uncertain, not_mentioned };

LabelClass label_class_from_string(const std::string& s);
std::string to_string(LabelClass c);

/// The fixed report-label taxonomy: 14 radiographic findings and
/// 19 clinical impressions.
const std::set<std::string>& findings_taxonomy();
const std::set<std::string>& impressions_taxonomy();
bool in_taxonomy(const std::string& label);

struct ReportRecord {
    std::string scan_id;
    std::string patient_id;
    std::string text;
    std::map<std::string, LabelClass> labels;
};

struct CohortConfig {
    std::set<std::string> allowed_positive = {"calcification", "atrophy",
                                              "cerebral small vessel disease", "hypodensity"};
    std::vector<std::string> followup_patterns = {"previous scan", "compared to", "no progression",
                                                  "prior imaging", "follow-up", "follow up"};
    bool treat_uncertain_as_positive = true;
};

void validate_config(const CohortConfig& cfg);

/// Parses line-delimited JSON records; rejects label names outside the
/// taxonomy and unknown classes, reporting the offending line number.
std::vector<ReportRecord> parse_reports(const std::string& path);

/// Keeps records whose positive (and, by default, uncertain) labels all lie
/// within the allowed set. Negative and not-mentioned labels never exclude.
std::vector<ReportRecord> filter_by_labels(const std::vector<ReportRecord>& records,
                                           const CohortConfig& cfg);

/// Removes records whose free text contains any follow-up pattern
/// (case-insensitive substring match).
std::vector<ReportRecord> filter_followups(const std::vector<ReportRecord>& records,
                                           const CohortConfig& cfg);

struct AuditRow {
    std::string step;
    std::size_t images = 0;
    std::size_t patients = 0;  // distinct patient ids
};

struct CohortResult {
    std::vector<ReportRecord> cohort;
    std::vector<AuditRow> audit;
};

/// Label filter, then follow-up filter; the audit table mirrors the paper's
/// filtering-step layout (the manual-review step is a pass-through here).
CohortResult select_cohort(const std::vector<ReportRecord>& records, const CohortConfig& cfg);

void write_audit_csv(const std::vector<AuditRow>& audit, const std::string& path);
void write_cohort_manifest(const std::vector<ReportRecord>& cohort, const std::string& path);

}  // namespace nad::cohort

#endif
