#include "stresskit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "stresskit/error.hpp"
#include "stresskit/random.hpp"

namespace stresskit {

std::optional<std::size_t> FeatureSchema::index_of(const std::string& name) const {
    auto it = std::find(feature_names.begin(), feature_names.end(), name);
    if (it == feature_names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - feature_names.begin());
}

void FeatureSchema::validate() const {
    std::set<std::string> seen;
    for (const auto& name : feature_names) {
        if (name.empty()) throw Error(ErrorCode::InvalidDataset, "empty feature name");
        if (!seen.insert(name).second) throw Error(ErrorCode::DuplicateFeatureName, name);
    }
    if (seen.count(label_name) != 0) {
        throw Error(ErrorCode::InvalidDataset, "label column '" + label_name + "' listed as a feature");
    }
}

Dataset::Dataset(FeatureSchema schema, std::vector<double> values, std::vector<Label> labels,
                 std::optional<std::vector<std::string>> subject_ids, std::size_t n_classes)
    : schema_(std::move(schema)),
      values_(std::move(values)),
      labels_(std::move(labels)),
      subject_ids_(std::move(subject_ids)) {
    schema_.validate();
    if (values_.size() != labels_.size() * schema_.width()) {
        throw Error(ErrorCode::InvalidDataset, "matrix size does not match rows x features");
    }
    if (subject_ids_ && subject_ids_->size() != labels_.size()) {
        throw Error(ErrorCode::InvalidDataset, "subject id count does not match row count");
    }
    for (std::size_t k = 0; k < values_.size(); ++k) {
        if (!std::isfinite(values_[k])) {
            throw Error(ErrorCode::NonFiniteValue, "row " + std::to_string(k / schema_.width()) +
                                                       ", column '" +
                                                       schema_.feature_names[k % schema_.width()] + "'");
        }
    }
    Label max_label = -1;
    for (Label y : labels_) {
        if (y < 0) throw Error(ErrorCode::InvalidDataset, "negative label");
        max_label = std::max(max_label, y);
    }
    const auto inferred = static_cast<std::size_t>(max_label + 1);
    n_classes_ = n_classes == 0 ? inferred : n_classes;
    if (n_classes_ < inferred) {
        throw Error(ErrorCode::InvalidDataset, "label exceeds declared class count");
    }
    if (n_classes_ < 2) throw Error(ErrorCode::InvalidDataset, "at least two classes are required");
}

std::vector<double> Dataset::column(std::size_t j) const {
    std::vector<double> out(rows());
    for (std::size_t i = 0; i < rows(); ++i) out[i] = at(i, j);
    return out;
}

Dataset Dataset::subset_rows(std::span<const std::size_t> indices) const {
    std::vector<double> values;
    values.reserve(indices.size() * cols());
    std::vector<Label> labels;
    labels.reserve(indices.size());
    std::optional<std::vector<std::string>> subjects;
    if (subject_ids_) subjects.emplace().reserve(indices.size());
    for (std::size_t i : indices) {
        auto r = row(i);
        values.insert(values.end(), r.begin(), r.end());
        labels.push_back(labels_[i]);
        if (subjects) subjects->push_back((*subject_ids_)[i]);
    }
    return Dataset(schema_, std::move(values), std::move(labels), std::move(subjects), n_classes_);
}

Dataset Dataset::subset_columns(std::span<const std::size_t> columns) const {
    FeatureSchema schema = schema_;
    schema.feature_names.clear();
    for (std::size_t j : columns) schema.feature_names.push_back(schema_.feature_names.at(j));
    std::vector<double> values;
    values.reserve(rows() * columns.size());
    for (std::size_t i = 0; i < rows(); ++i) {
        for (std::size_t j : columns) values.push_back(at(i, j));
    }
    return Dataset(std::move(schema), std::move(values), labels_, subject_ids_, n_classes_);
}

Dataset Dataset::select_features(const std::vector<std::string>& names) const {
    std::set<std::string> wanted(names.begin(), names.end());
    std::vector<std::size_t> columns;
    for (std::size_t j = 0; j < cols(); ++j) {
        if (wanted.count(schema_.feature_names[j])) columns.push_back(j);
    }
    if (columns.size() != wanted.size()) {
        throw Error(ErrorCode::InvalidDataset, "selected feature missing from schema");
    }
    return subset_columns(columns);
}

Dataset Dataset::append_rows(std::span<const double> values, std::span<const Label> labels,
                             const std::string& subject_fill) const {
    std::vector<double> all = values_;
    all.insert(all.end(), values.begin(), values.end());
    std::vector<Label> all_labels = labels_;
    all_labels.insert(all_labels.end(), labels.begin(), labels.end());
    auto subjects = subject_ids_;
    if (subjects) subjects->resize(all_labels.size(), subject_fill);
    return Dataset(schema_, std::move(all), std::move(all_labels), std::move(subjects), n_classes_);
}

// ---------------------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
                cell.push_back('"');
                ++k;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
        } else if (c != '\r') {
            cell.push_back(c);
        }
    }
    cells.push_back(std::move(cell));
    for (auto& s : cells) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }
    return cells;
}

bool parse_double(const std::string& text, double& out) {
    const char* first = text.data();
    const char* last = first + text.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    return out + "\"";
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

Dataset load_dataset(const std::filesystem::path& path, const std::string& label_column,
                     const std::string& subject_column) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::EmptyDataset, path.string() + " has no header");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = split_csv_line(line);

    std::optional<std::size_t> label_at;
    std::optional<std::size_t> subject_at;
    FeatureSchema schema;
    schema.label_name = label_column;
    std::vector<std::size_t> feature_at;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == label_column && !label_at) {
            label_at = c;
        } else if (!subject_column.empty() && header[c] == subject_column && !subject_at) {
            subject_at = c;
        } else {
            schema.feature_names.push_back(header[c]);
            feature_at.push_back(c);
        }
    }
    if (!label_at) throw Error(ErrorCode::MissingLabelColumn, "'" + label_column + "' not in header");
    if (subject_at) schema.subject_column = subject_column;
    schema.validate();

    std::vector<double> values;
    std::vector<Label> labels;
    std::optional<std::vector<std::string>> subjects;
    if (subject_at) subjects.emplace();

    std::size_t row = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw Error(ErrorCode::MalformedCsv, "line " + std::to_string(line_no) + " has " +
                                                     std::to_string(cells.size()) + " cells, expected " +
                                                     std::to_string(header.size()));
        }
        for (std::size_t f = 0; f < feature_at.size(); ++f) {
            double v = 0.0;
            const auto& cell = cells[feature_at[f]];
            if (!parse_double(cell, v) || !std::isfinite(v)) {
                throw Error(ErrorCode::NonFiniteValue, "row " + std::to_string(row) + ", column '" +
                                                           schema.feature_names[f] + "': '" + cell + "'");
            }
            values.push_back(v);
        }
        double y = 0.0;
        const auto& label_cell = cells[*label_at];
        if (!parse_double(label_cell, y) || !std::isfinite(y) || y < 0 || y != std::floor(y) ||
            y > 1e6) {
            throw Error(ErrorCode::NonFiniteValue, "row " + std::to_string(row) + ", column '" +
                                                       label_column + "': '" + label_cell +
                                                       "' is not a non-negative integer label");
        }
        labels.push_back(static_cast<Label>(y));
        if (subjects) subjects->push_back(cells[*subject_at]);
        ++row;
    }
    if (labels.empty()) throw Error(ErrorCode::EmptyDataset, path.string() + " has no data rows");
    return Dataset(std::move(schema), std::move(values), std::move(labels), std::move(subjects));
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    const auto& schema = ds.schema();
    std::vector<std::string> header;
    if (ds.has_subjects()) header.push_back(schema.subject_column.value_or("subject_id"));
    header.insert(header.end(), schema.feature_names.begin(), schema.feature_names.end());
    header.push_back(schema.label_name);
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << quote_if_needed(header[c]);
    out << '\n';
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        if (ds.has_subjects()) out << quote_if_needed((*ds.subject_ids())[i]) << ',';
        for (double v : ds.row(i)) out << format_double(v) << ',';
        out << ds.label(i) << '\n';
    }
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------------------

std::map<Label, std::size_t> class_histogram(const Dataset& ds) {
    std::map<Label, std::size_t> counts;
    for (std::size_t c = 0; c < ds.n_classes(); ++c) counts[static_cast<Label>(c)] = 0;
    for (Label y : ds.labels()) ++counts[y];
    return counts;
}

SplitPair stratified_split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "train fraction must lie in (0, 1)");
    }
    std::vector<std::vector<std::size_t>> by_class(ds.n_classes());
    for (std::size_t i = 0; i < ds.rows(); ++i) by_class[ds.label(i)].push_back(i);

    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& members = by_class[c];
        if (members.empty()) continue;
        if (members.size() < 2) {
            throw Error(ErrorCode::ClassTooSmall, "class " + std::to_string(c) + " has " +
                                                      std::to_string(members.size()) + " sample(s)");
        }
        Rng rng(derive_seed(seed, c));
        rng.shuffle(members);
        const auto n = members.size();
        auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
        n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
        train_idx.insert(train_idx.end(), members.begin(), members.begin() + n_train);
        test_idx.insert(test_idx.end(), members.begin() + n_train, members.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    SplitPair split{ds.subset_rows(train_idx), ds.subset_rows(test_idx), train_idx, test_idx,
                    train_fraction, seed};
    return split;
}

Dataset generate_synthetic(const SynthSpec& spec) {
    if (spec.n_classes < 2) throw Error(ErrorCode::InvalidSpec, "n_classes must be >= 2");
    if (spec.class_counts.size() != spec.n_classes) {
        throw Error(ErrorCode::InvalidSpec, "class_counts must list one count per class");
    }
    if (std::any_of(spec.class_counts.begin(), spec.class_counts.end(), [](auto n) { return n == 0; })) {
        throw Error(ErrorCode::InvalidSpec, "class counts must be positive");
    }
    if (spec.n_informative < 1) throw Error(ErrorCode::InvalidSpec, "n_informative must be >= 1");
    if (!(spec.class_separation >= 0.0) || !std::isfinite(spec.class_separation)) {
        throw Error(ErrorCode::InvalidSpec, "class_separation must be a finite non-negative real");
    }

    Rng rng(spec.seed);
    const std::size_t n_inf = spec.n_informative;
    const std::size_t width = n_inf + spec.n_redundant + spec.n_noise;

    // Each informative column ranks the classes by its own random permutation, so every
    // pair of class means differs by at least class_separation.
    std::vector<std::vector<double>> class_mean(n_inf, std::vector<double>(spec.n_classes));
    for (auto& means : class_mean) {
        std::vector<std::size_t> rank(spec.n_classes);
        std::iota(rank.begin(), rank.end(), 0);
        rng.shuffle(rank);
        for (std::size_t c = 0; c < spec.n_classes; ++c) {
            means[c] = spec.class_separation * static_cast<double>(rank[c]);
        }
    }
    std::vector<double> mixing(spec.n_redundant * n_inf);
    for (double& w : mixing) w = rng.normal() / std::sqrt(static_cast<double>(n_inf));

    // Column positions are shuffled so role never correlates with column index.
    std::vector<std::size_t> position(width);
    std::iota(position.begin(), position.end(), 0);
    rng.shuffle(position);
    FeatureSchema schema;
    schema.feature_names.resize(width);
    for (std::size_t j = 0; j < width; ++j) {
        std::string name;
        if (j < n_inf) name = "inf_" + std::to_string(j);
        else if (j < n_inf + spec.n_redundant) name = "red_" + std::to_string(j - n_inf);
        else name = "noise_" + std::to_string(j - n_inf - spec.n_redundant);
        schema.feature_names[position[j]] = std::move(name);
    }

    std::vector<Label> labels;
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        labels.insert(labels.end(), spec.class_counts[c], static_cast<Label>(c));
    }
    rng.shuffle(labels);

    std::vector<double> values(labels.size() * width);
    std::vector<double> informative(n_inf);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        double* row = values.data() + i * width;
        for (std::size_t j = 0; j < n_inf; ++j) {
            informative[j] = class_mean[j][labels[i]] + rng.normal();
            row[position[j]] = informative[j];
        }
        for (std::size_t r = 0; r < spec.n_redundant; ++r) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n_inf; ++j) acc += mixing[r * n_inf + j] * informative[j];
            row[position[n_inf + r]] = acc;
        }
        for (std::size_t z = 0; z < spec.n_noise; ++z) {
            row[position[n_inf + spec.n_redundant + z]] = rng.normal();
        }
    }
    std::optional<std::vector<std::string>> subjects;
    if (spec.n_subjects > 0) {
        schema.subject_column = "subject_id";
        subjects.emplace(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) (*subjects)[i] = "S" + std::to_string(i % spec.n_subjects + 1);
    }
    return Dataset(std::move(schema), std::move(values), std::move(labels), std::move(subjects), spec.n_classes);
}

}  // namespace stresskit
