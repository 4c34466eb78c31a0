#pragma once
// CSV file formats. All files are UTF-8, comma separated with a header row;
// identifiers are restricted to [A-Za-z0-9_-]+ so no quoting is needed.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nutmeg/pipeline.hpp"
#include "nutmeg/simulator.hpp"
#include "nutmeg/types.hpp"

namespace nutmeg::io {

namespace fs = std::filesystem;

// Unreadable or unwritable files.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed file content; the message carries file and line.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CsvTable {
    fs::path source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;  // 1-based source line per row

    std::size_t column(const std::string& name) const;  // throws ParseError
    [[noreturn]] void fail(std::size_t row, const std::string& what) const;
};

CsvTable read_csv(const fs::path& path);
std::string read_file(const fs::path& path);
// Writes via a temporary file and rename.
void write_file(const fs::path& path, const std::string& content);

std::string format_double(double value);  // 9 significant digits
bool valid_identifier(const std::string& id);

// Distinct labels, sorted numerically when every label is an integer and
// lexicographically otherwise.
std::vector<std::string> ordered_labels(const std::vector<std::string>& observed);

// `labels` fixes the label space; otherwise it is the sorted set of labels
// present (numerically when every label is an integer).
AnnotationSet read_annotations(const fs::path& path, const std::optional<std::vector<std::string>>& labels = {});
SubpopulationMap read_annotators(const fs::path& path);

std::string annotations_csv(const AnnotationSet& annotations);
std::string annotators_csv(const std::vector<std::string>& annotator_ids, const std::vector<std::size_t>& subpop,
                           const std::vector<std::string>& subpop_names);

// One row per (item, subpopulation); Missing cells are skipped.
std::string labels_csv(const AnnotationSet& annotations, const AggregateOutput& output);
std::string posteriors_csv(const AnnotationSet& annotations, const AggregateOutput& output);
std::string competence_csv(const AnnotationSet& annotations, const CompetenceTable& competence);

std::string truth_labels_csv(const SyntheticWorld& world);
std::string truth_spam_csv(const SyntheticWorld& world);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const fs::path& path);

}  // namespace nutmeg::io
