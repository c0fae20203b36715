#include "nad/cohort.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

using nlohmann::json;

namespace nad::cohort {

LabelClass label_class_from_string(const std::string& s) {
    if (s == "positive") return LabelClass::positive;
    if (s == "negative") return LabelClass::negative;
    if (s == "uncertain") return LabelClass::uncertain;
    if (s == "not mentioned" || s == "not_mentioned") return LabelClass::not_mentioned;
    throw std::invalid_argument("unknown label class: " + s);
}

std::string to_string(LabelClass c) {
    switch (c) {
        case LabelClass::positive: return "positive";
        case LabelClass::negative: return "negative";
        case LabelClass::uncertain: return "uncertain";
        case LabelClass::not_mentioned: return "not mentioned";
    }
    return "?";
}

const std::set<std::string>& findings_taxonomy() {
    static const std::set<std::string> k = {
        "artefact", "collection", "compression", "dilation", "effacement", "herniation",
        "hyperdensity", "hypodensity", "loss of differentiation", "malacic changes",
        "mass effect", "midline shift", "oedema", "swelling"};
    return k;
}

const std::set<std::string>& impressions_taxonomy() {
    static const std::set<std::string> k = {
        "abscess", "atrophy", "aneurysm", "calcification", "cavernoma",
        "cerebral small vessel disease", "congenital abnormality", "cyst",
        "evidence of surgery/intervention", "fracture", "gliosis", "hemorrhage", "hydrocephalus",
        "ischemia", "infection", "tumor", "vessel occlusion", "lesion", "pneumocephalus"};
    return k;
}

bool in_taxonomy(const std::string& label) {
    return findings_taxonomy().count(label) > 0 || impressions_taxonomy().count(label) > 0;
}

void validate_config(const CohortConfig& cfg) {
    for (const auto& a : cfg.allowed_positive)
        if (!in_taxonomy(a))
            throw std::invalid_argument("cohort config: allowed label outside taxonomy: " + a);
    for (const auto& p : cfg.followup_patterns)
        if (p.empty()) throw std::invalid_argument("cohort config: empty follow-up pattern");
}

std::vector<ReportRecord> parse_reports(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("parse_reports: cannot open " + path);
    std::vector<ReportRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error("parse_reports: line " + std::to_string(lineno) + ": " + e.what());
        }
        ReportRecord r;
        try {
            r.scan_id = j.at("scan_id").get<std::string>();
            r.patient_id = j.at("patient_id").get<std::string>();
            r.text = j.value("text", std::string{});
            if (j.contains("labels"))
                for (const auto& [name, cls] : j.at("labels").items()) {
                    if (!in_taxonomy(name))
                        throw std::runtime_error("label name outside taxonomy: '" + name + "'");
                    r.labels[name] = label_class_from_string(cls.get<std::string>());
                }
        } catch (const std::exception& e) {
            throw std::runtime_error("parse_reports: line " + std::to_string(lineno) + ": " + e.what());
        }
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

bool passes_label_filter(const ReportRecord& r, const CohortConfig& cfg) {
    for (const auto& [name, cls] : r.labels) {
        const bool excluding = cls == LabelClass::positive ||
                               (cfg.treat_uncertain_as_positive && cls == LabelClass::uncertain);
        if (excluding && cfg.allowed_positive.count(name) == 0) return false;
    }
    return true;
}

std::string lowercase(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool mentions_followup(const ReportRecord& r, const CohortConfig& cfg) {
    const std::string text = lowercase(r.text);
    for (const auto& p : cfg.followup_patterns)
        if (text.find(lowercase(p)) != std::string::npos) return true;
    return false;
}

std::size_t distinct_patients(const std::vector<ReportRecord>& records) {
    std::set<std::string> ids;
    for (const auto& r : records) ids.insert(r.patient_id);
    return ids.size();
}

}  // namespace

std::vector<ReportRecord> filter_by_labels(const std::vector<ReportRecord>& records,
                                           const CohortConfig& cfg) {
    validate_config(cfg);
    std::vector<ReportRecord> out;
    for (const auto& r : records)
        if (passes_label_filter(r, cfg)) out.push_back(r);
    return out;
}

std::vector<ReportRecord> filter_followups(const std::vector<ReportRecord>& records,
                                           const CohortConfig& cfg) {
    validate_config(cfg);
    std::vector<ReportRecord> out;
    for (const auto& r : records)
        if (!mentions_followup(r, cfg)) out.push_back(r);
    return out;
}

CohortResult select_cohort(const std::vector<ReportRecord>& records, const CohortConfig& cfg) {
    CohortResult res;
    res.audit.push_back({"initial cohort", records.size(), distinct_patients(records)});
    auto after_labels = filter_by_labels(records, cfg);
    res.audit.push_back({"after label filter", after_labels.size(), distinct_patients(after_labels)});
    auto after_followups = filter_followups(after_labels, cfg);
    res.audit.push_back(
        {"after follow-up filter", after_followups.size(), distinct_patients(after_followups)});
    // Manual image review is out of scope for record-level filtering; the
    // row is kept so the table shape matches the reference protocol.
    res.audit.push_back(
        {"after manual review (pass-through)", after_followups.size(), distinct_patients(after_followups)});
    res.audit.push_back(
        {"healthy training set", after_followups.size(), distinct_patients(after_followups)});
    res.cohort = std::move(after_followups);
    return res;
}

void write_audit_csv(const std::vector<AuditRow>& audit, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("write_audit_csv: cannot open " + path);
    os << "step,images,patients\n";
    for (const auto& row : audit)
        os << "\"" << row.step << "\"," << row.images << "," << row.patients << "\n";
}

void write_cohort_manifest(const std::vector<ReportRecord>& cohort, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("write_cohort_manifest: cannot open " + path);
    for (const auto& r : cohort) {
        json j;
        j["scan_id"] = r.scan_id;
        j["patient_id"] = r.patient_id;
        os << j.dump() << "\n";
    }
}

}  // namespace nad::cohort
