#include "nutmeg/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <openssl/evp.h>

namespace nutmeg::io {

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(source.string() + ":1: missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

void CsvTable::fail(std::size_t row, const std::string& what) const {
    throw ParseError(source.string() + ":" + std::to_string(lines[row]) + ": " + what);
}

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return fields;
}

std::string trim(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
    std::size_t lead = 0;
    while (lead < s.size() && (s[lead] == ' ' || s[lead] == '\t')) ++lead;
    return s.substr(lead);
}

}  // namespace

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("error reading '" + path.string() + "'");
    return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out << content;
        out.flush();
        if (!out) throw IoError("error writing '" + tmp.string() + "'");
    }
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

CsvTable read_csv(const fs::path& path) {
    const std::string content = read_file(path);
    CsvTable table;
    table.source = path;
    std::istringstream in(content);
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        auto fields = split(line);
        for (auto& f : fields) f = trim(f);
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size())
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(table.header.size()) + " fields, found " + std::to_string(fields.size()));
        table.rows.push_back(std::move(fields));
        table.lines.push_back(line_no);
    }
    if (!have_header) throw ParseError(path.string() + ":1: empty file, expected a header row");
    return table;
}

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", value);
    return buf;
}

bool valid_identifier(const std::string& id) {
    if (id.empty()) return false;
    return std::all_of(id.begin(), id.end(), [](unsigned char c) {
        return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    });
}

namespace {

bool all_integers(const std::set<std::string>& labels) {
    for (const auto& l : labels) {
        if (l.empty() || l.size() > 18) return false;
        const std::size_t start = l[0] == '-' ? 1 : 0;
        if (start == l.size()) return false;
        for (std::size_t x = start; x < l.size(); ++x)
            if (l[x] < '0' || l[x] > '9') return false;
    }
    return true;
}

}  // namespace

std::vector<std::string> ordered_labels(const std::vector<std::string>& observed) {
    const std::set<std::string> seen(observed.begin(), observed.end());
    std::vector<std::string> out(seen.begin(), seen.end());
    if (all_integers(seen))
        std::sort(out.begin(), out.end(),
                  [](const std::string& a, const std::string& b) { return std::stoll(a) < std::stoll(b); });
    return out;
}

AnnotationSet read_annotations(const fs::path& path, const std::optional<std::vector<std::string>>& labels) {
    const auto table = read_csv(path);
    const auto c_item = table.column("item_id");
    const auto c_annotator = table.column("annotator_id");
    const auto c_label = table.column("label");

    AnnotationSet out;
    if (labels) {
        out.label_space.labels = *labels;
    } else {
        std::vector<std::string> seen;
        for (const auto& row : table.rows) seen.push_back(row[c_label]);
        out.label_space.labels = ordered_labels(seen);
    }
    std::unordered_map<std::string, std::size_t> label_index;
    for (std::size_t l = 0; l < out.label_space.size(); ++l) label_index.emplace(out.label_space.labels[l], l);

    std::unordered_map<std::string, std::size_t> item_index;
    std::unordered_map<std::string, std::size_t> annotator_index;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        for (std::size_t c : {c_item, c_annotator, c_label})
            if (!valid_identifier(row[c])) table.fail(r, "invalid identifier '" + row[c] + "'");
        const auto label = label_index.find(row[c_label]);
        if (label == label_index.end()) table.fail(r, "unknown label '" + row[c_label] + "'");
        auto [it, fresh] = item_index.emplace(row[c_item], out.items.size());
        if (fresh) out.items.push_back(row[c_item]);
        auto [jt, fresh_a] = annotator_index.emplace(row[c_annotator], out.annotators.size());
        if (fresh_a) out.annotators.push_back(row[c_annotator]);
        out.records.push_back({it->second, jt->second, label->second});
    }
    return out;
}

SubpopulationMap read_annotators(const fs::path& path) {
    const auto table = read_csv(path);
    const auto c_annotator = table.column("annotator_id");
    const auto c_subpop = table.column("subpopulation");
    SubpopulationMap out;
    std::unordered_map<std::string, std::size_t> subpop_index;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (!valid_identifier(row[c_annotator])) table.fail(r, "invalid annotator id '" + row[c_annotator] + "'");
        if (!valid_identifier(row[c_subpop])) table.fail(r, "invalid subpopulation '" + row[c_subpop] + "'");
        auto [it, fresh] = subpop_index.emplace(row[c_subpop], out.subpopulations.size());
        if (fresh) out.subpopulations.push_back(row[c_subpop]);
        if (!out.assignment.emplace(row[c_annotator], it->second).second)
            table.fail(r, "annotator '" + row[c_annotator] + "' listed twice");
    }
    return out;
}

std::string annotations_csv(const AnnotationSet& annotations) {
    std::string out = "item_id,annotator_id,label\n";
    for (const auto& rec : annotations.records) {
        out += annotations.items[rec.item];
        out += ',';
        out += annotations.annotators[rec.annotator];
        out += ',';
        out += annotations.label_space.labels[rec.label];
        out += '\n';
    }
    return out;
}

std::string annotators_csv(const std::vector<std::string>& annotator_ids, const std::vector<std::size_t>& subpop,
                           const std::vector<std::string>& subpop_names) {
    std::string out = "annotator_id,subpopulation\n";
    for (std::size_t j = 0; j < annotator_ids.size(); ++j) out += annotator_ids[j] + "," + subpop_names[subpop[j]] + "\n";
    return out;
}

namespace {

const char* imputed_flag(CellStatus status) {
    switch (status) {
        case CellStatus::Observed: return "false";
        case CellStatus::Imputed:
        case CellStatus::Fallback: return "true";
        case CellStatus::Missing: return "missing";
    }
    return "missing";
}

}  // namespace

std::string labels_csv(const AnnotationSet& annotations, const AggregateOutput& output) {
    const auto& table = output.posterior;
    std::string out = "item_id,subpopulation,label,posterior_max,confidence,imputed\n";
    for (std::size_t i = 0; i < table.n_items(); ++i) {
        for (std::size_t k = 0; k < table.n_subpops(); ++k) {
            if (table.status(i, k) == CellStatus::Missing) continue;
            const auto cell = table.cell(i, k);
            const std::size_t label = table.decoded(i, k);
            out += annotations.items[i] + "," + output.subpopulations[k] + "," + annotations.label_space.labels[label] +
                   "," + format_double(cell[label]) + "," + format_double(confidence(cell)) + "," +
                   imputed_flag(table.status(i, k)) + "\n";
        }
    }
    return out;
}

std::string posteriors_csv(const AnnotationSet& annotations, const AggregateOutput& output) {
    const auto& table = output.posterior;
    std::string out = "item_id,subpopulation,label,probability\n";
    for (std::size_t i = 0; i < table.n_items(); ++i) {
        for (std::size_t k = 0; k < table.n_subpops(); ++k) {
            if (table.status(i, k) == CellStatus::Missing) continue;
            const auto cell = table.cell(i, k);
            for (std::size_t l = 0; l < table.n_labels(); ++l)
                out += annotations.items[i] + "," + output.subpopulations[k] + "," +
                       annotations.label_space.labels[l] + "," + format_double(cell[l]) + "\n";
        }
    }
    return out;
}

std::string competence_csv(const AnnotationSet& annotations, const CompetenceTable& competence) {
    std::string out = "annotator_id,theta";
    for (const auto& l : annotations.label_space.labels) out += ",spam_emission_" + l;
    out += '\n';
    for (std::size_t j = 0; j < competence.n_annotators(); ++j) {
        out += annotations.annotators[j] + "," + format_double(competence.theta[j]);
        for (double x : competence.spam_emission(j)) out += "," + format_double(x);
        out += '\n';
    }
    return out;
}

std::string truth_labels_csv(const SyntheticWorld& world) {
    std::string out = "item_id,subpopulation,true_label\n";
    const auto& ann = world.annotations;
    for (std::size_t i = 0; i < ann.items.size(); ++i)
        for (std::size_t k = 0; k < world.subpops.subpopulations.size(); ++k)
            out += ann.items[i] + "," + world.subpops.subpopulations[k] + "," +
                   ann.label_space.labels[world.true_label(i, k)] + "\n";
    return out;
}

std::string truth_spam_csv(const SyntheticWorld& world) {
    std::string out = "annotator_id,true_spam_rate\n";
    for (std::size_t j = 0; j < world.annotator_ids.size(); ++j)
        out += world.annotator_ids[j] + "," + format_double(world.true_spam_rates[j]) + "\n";
    return out;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw IoError("sha256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int x = 0; x < len; ++x) {
        out += hex[digest[x] >> 4];
        out += hex[digest[x] & 0xf];
    }
    return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

}  // namespace nutmeg::io
