#include "acmap/stream.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "acmap/rng.hpp"

namespace acmap {

namespace {

constexpr char kEmbMagic[8] = {'A', 'C', 'M', 'E', 'M', 'B', '1', '\0'};

std::vector<std::uint32_t> sorted_class_ids(const std::vector<Sample>& samples) {
    std::vector<std::uint32_t> ids;
    ids.reserve(samples.size());
    for (const Sample& s : samples) ids.push_back(s.label);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

void validate_task(const TaskDataset& task) {
    std::map<std::uint32_t, std::pair<std::size_t, std::size_t>> counts;
    for (std::size_t i : task.train_idx) counts[task.samples[i].label].first++;
    for (std::size_t i : task.eval_idx) counts[task.samples[i].label].second++;
    for (std::uint32_t c : task.class_ids) {
        const auto it = counts.find(c);
        if (it == counts.end() || it->second.first == 0 || it->second.second == 0) {
            throw DataError("task " + std::to_string(task.task_id) + ": class " +
                            std::to_string(c) + " needs samples in both splits");
        }
    }
}

Vector gaussian_vector(std::size_t dim, Rng& rng) {
    Vector v(dim);
    for (double& x : v) x = rng.gaussian();
    return v;
}

Vector unit_vector(std::size_t dim, Rng& rng) {
    Vector v = gaussian_vector(dim, rng);
    const double n = norm2(v);
    for (double& x : v) x /= n;
    return v;
}

}  // namespace

Batch TaskDataset::batch(Split split) const {
    const std::vector<std::size_t>& idx = split == Split::train ? train_idx : eval_idx;
    Batch b;
    b.reserve(idx.size());
    for (std::size_t i : idx) b.push_back(SampleRef{&samples[i].x, samples[i].label});
    return b;
}

TaskStream::TaskStream(std::vector<TaskDataset> tasks) : tasks_(std::move(tasks)) {
    std::vector<std::uint32_t> seen;
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
        TaskDataset& task = tasks_[i];
        task.task_id = static_cast<std::uint32_t>(i + 1);
        if (task.class_ids.empty()) task.class_ids = sorted_class_ids(task.samples);
        validate_task(task);
        for (std::uint32_t c : task.class_ids) {
            if (std::find(seen.begin(), seen.end(), c) != seen.end()) {
                throw DataError("class " + std::to_string(c) + " appears in more than one task");
            }
            seen.push_back(c);
        }
    }
}

const TaskDataset& TaskStream::task(std::uint32_t t) const {
    if (t < 1 || t > tasks_.size()) {
        throw DataError("task index " + std::to_string(t) + " out of range");
    }
    return tasks_[t - 1];
}

std::size_t TaskStream::input_dim() const {
    if (tasks_.empty() || tasks_.front().samples.empty()) return 0;
    return tasks_.front().samples.front().x.size();
}

void TaskStream::begin_phase(std::uint32_t t) {
    if (t < 1 || t > tasks_.size()) {
        throw DataError("phase " + std::to_string(t) + " out of range");
    }
    phase_ = t;
}

Batch TaskStream::train_batch(std::uint32_t t) const {
    if (t != phase_ && !diagnostics_) ++violations_;
    return task(t).batch(Split::train);
}

Batch TaskStream::eval_batch(std::uint32_t t) const {
    if (t > phase_ && !diagnostics_) ++violations_;
    return task(t).batch(Split::eval);
}

Batch TaskStream::diagnostic_batch(std::uint32_t t, Split split) const {
    if (!diagnostics_) ++violations_;
    return task(t).batch(split);
}

void validate_stream_spec(const StreamSpec& spec) {
    if (spec.n_tasks < 1) throw ConfigError("stream: n_tasks must be >= 1");
    if (spec.base_classes < 1) throw ConfigError("stream: base_classes must be >= 1");
    if (spec.n_tasks > 1 && spec.inc_classes < 1) {
        throw ConfigError("stream: inc_classes must be >= 1 when n_tasks > 1");
    }
    if (spec.train_per_class < 1 || spec.eval_per_class < 1) {
        throw ConfigError("stream: samples per class must be >= 1 in both splits");
    }
    if (spec.input_dim < 1) throw ConfigError("stream: input_dim must be >= 1");
    if (!(spec.noise_sigma >= 0.0)) throw ConfigError("stream: noise_sigma must be >= 0");
}

TaskStream generate_synthetic_stream(const StreamSpec& spec) {
    validate_stream_spec(spec);
    const std::size_t n_classes = spec.base_classes + (spec.n_tasks - 1) * spec.inc_classes;

    std::vector<Vector> means(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
        Rng rng(derive_seed(spec.seed, "class_mean", c));
        means[c] = unit_vector(spec.input_dim, rng);
        for (double& x : means[c]) x *= spec.cluster_separation;
    }

    Vector plane_u1, plane_u2, offset_dir;
    if (spec.drift_model == DriftModel::rotation) {
        Rng rng(derive_seed(spec.seed, "drift_plane"));
        plane_u1 = unit_vector(spec.input_dim, rng);
        plane_u2 = gaussian_vector(spec.input_dim, rng);
        const double proj = dot(plane_u2, plane_u1);
        for (std::size_t i = 0; i < plane_u2.size(); ++i) plane_u2[i] -= proj * plane_u1[i];
        const double n = norm2(plane_u2);
        for (double& x : plane_u2) x /= n;
    } else if (spec.drift_model == DriftModel::offset) {
        Rng rng(derive_seed(spec.seed, "drift_dir"));
        offset_dir = unit_vector(spec.input_dim, rng);
    }

    auto apply_drift = [&](Vector& x, std::size_t t) {
        if (t == 1 || spec.drift_model == DriftModel::none || spec.drift_rate == 0.0) return;
        const double amount = spec.drift_rate * double(t - 1);
        if (spec.drift_model == DriftModel::offset) {
            for (std::size_t i = 0; i < x.size(); ++i) x[i] += amount * offset_dir[i];
        } else {
            const double a = dot(x, plane_u1);
            const double b = dot(x, plane_u2);
            const double da = a * std::cos(amount) - b * std::sin(amount) - a;
            const double db = a * std::sin(amount) + b * std::cos(amount) - b;
            for (std::size_t i = 0; i < x.size(); ++i)
                x[i] += da * plane_u1[i] + db * plane_u2[i];
        }
    };

    std::vector<TaskDataset> tasks(spec.n_tasks);
    std::size_t next_class = 0;
    for (std::size_t t = 1; t <= spec.n_tasks; ++t) {
        TaskDataset& task = tasks[t - 1];
        task.task_id = static_cast<std::uint32_t>(t);
        const std::size_t count = t == 1 ? spec.base_classes : spec.inc_classes;
        for (std::size_t k = 0; k < count; ++k, ++next_class) {
            const std::uint32_t label = static_cast<std::uint32_t>(next_class);
            Rng train_rng(derive_seed(spec.seed, "train_samples", next_class));
            Rng eval_rng(derive_seed(spec.seed, "eval_samples", next_class));
            for (std::size_t s = 0; s < spec.train_per_class; ++s) {
                Vector x = means[next_class];
                for (std::size_t i = 0; i < x.size(); ++i)
                    x[i] += spec.noise_sigma * train_rng.gaussian();
                apply_drift(x, t);
                task.train_idx.push_back(task.samples.size());
                task.samples.push_back(Sample{std::move(x), label});
            }
            for (std::size_t s = 0; s < spec.eval_per_class; ++s) {
                Vector x = means[next_class];
                for (std::size_t i = 0; i < x.size(); ++i)
                    x[i] += spec.noise_sigma * eval_rng.gaussian();
                apply_drift(x, t);
                task.eval_idx.push_back(task.samples.size());
                task.samples.push_back(Sample{std::move(x), label});
            }
        }
    }
    return TaskStream(std::move(tasks));
}

void write_embedding_file(const TaskStream& stream, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    std::size_t n = 0;
    for (const TaskDataset& t : stream.tasks()) n += t.samples.size();
    const std::uint32_t header[2] = {static_cast<std::uint32_t>(n),
                                     static_cast<std::uint32_t>(stream.input_dim())};
    out.write(kEmbMagic, sizeof(kEmbMagic));
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    std::vector<float> row;
    for (const TaskDataset& t : stream.tasks()) {
        for (const Sample& s : t.samples) {
            out.write(reinterpret_cast<const char*>(&s.label), sizeof(std::uint32_t));
            row.assign(s.x.begin(), s.x.end());
            out.write(reinterpret_cast<const char*>(row.data()),
                      static_cast<std::streamsize>(row.size() * sizeof(float)));
        }
    }
    if (!out) throw IoError("short write to " + path);
}

void write_embedding_csv(const TaskStream& stream, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "class_id";
    for (std::size_t j = 0; j < stream.input_dim(); ++j) out << ",v" << j;
    out << "\n";
    char buf[64];
    for (const TaskDataset& t : stream.tasks()) {
        for (const Sample& s : t.samples) {
            out << s.label;
            for (double v : s.x) {
                std::snprintf(buf, sizeof(buf), ",%.9g", double(float(v)));
                out << buf;
            }
            out << "\n";
        }
    }
    if (!out) throw IoError("short write to " + path);
}

namespace {

std::vector<Sample> read_embedding_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kEmbMagic, 8) != 0) {
        throw FormatError(path + ": bad magic at byte 0");
    }
    std::uint32_t header[2];
    if (!in.read(reinterpret_cast<char*>(header), sizeof(header))) {
        throw FormatError(path + ": truncated header at byte 8");
    }
    const std::size_t n = header[0];
    const std::size_t dim = header[1];
    if (dim == 0) throw FormatError(path + ": zero dimension in header at byte 12");
    std::vector<Sample> samples;
    samples.reserve(n);
    std::vector<float> row(dim);
    std::size_t offset = 16;
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t label;
        if (!in.read(reinterpret_cast<char*>(&label), sizeof(label)) ||
            !in.read(reinterpret_cast<char*>(row.data()),
                     static_cast<std::streamsize>(dim * sizeof(float)))) {
            throw FormatError(path + ": truncated record " + std::to_string(i) + " at byte " +
                              std::to_string(offset) + " (header says n=" + std::to_string(n) +
                              ")");
        }
        offset += sizeof(label) + dim * sizeof(float);
        Sample s;
        s.label = label;
        s.x.assign(row.begin(), row.end());
        if (!all_finite(s.x)) {
            throw FormatError(path + ": non-finite value in record " + std::to_string(i));
        }
        samples.push_back(std::move(s));
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw FormatError(path + ": trailing bytes after record " + std::to_string(n) +
                          " at byte " + std::to_string(offset));
    }
    return samples;
}

std::vector<Sample> read_embedding_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("class_id", 0) != 0) {
        throw FormatError(path + ": missing class_id header on line 1");
    }
    std::vector<Sample> samples;
    std::size_t lineno = 1;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        Sample s;
        if (!std::getline(ss, field, ',')) {
            throw FormatError(path + ": bad row on line " + std::to_string(lineno));
        }
        try {
            s.label = static_cast<std::uint32_t>(std::stoul(field));
            while (std::getline(ss, field, ',')) s.x.push_back(std::stod(field));
        } catch (const std::exception&) {
            throw FormatError(path + ": bad value on line " + std::to_string(lineno));
        }
        if (dim == 0) dim = s.x.size();
        if (s.x.empty() || s.x.size() != dim) {
            throw FormatError(path + ": row width mismatch on line " + std::to_string(lineno));
        }
        if (!all_finite(s.x)) {
            throw FormatError(path + ": non-finite value on line " + std::to_string(lineno));
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

// ACMEMB1 magic selects the binary reader, a class_id header selects CSV;
// anything else is a bad magic.
bool looks_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char head[8] = {};
    in.read(head, sizeof(head));
    if (in.gcount() >= 8 && std::memcmp(head, kEmbMagic, 8) == 0) return true;
    if (in.gcount() >= 8 && std::memcmp(head, "class_id", 8) == 0) return false;
    throw FormatError(path + ": bad magic at byte 0 (neither ACMEMB1 nor a class_id CSV)");
}

std::map<std::uint32_t, std::vector<Sample>> group_by_class(std::vector<Sample> samples) {
    std::map<std::uint32_t, std::vector<Sample>> by_class;
    for (Sample& s : samples) by_class[s.label].push_back(std::move(s));
    return by_class;
}

}  // namespace

TaskStream load_embedding_stream(const std::string& path, const SplitSpec& split) {
    if (split.base_classes < 1) throw ConfigError("split: base_classes must be >= 1");
    if (!(split.eval_fraction > 0.0 && split.eval_fraction < 1.0)) {
        throw ConfigError("split: eval_fraction must be in (0,1)");
    }
    std::vector<Sample> samples =
        looks_binary(path) ? read_embedding_binary(path) : read_embedding_csv(path);
    if (samples.empty()) throw DataError(path + ": no records");

    auto by_class = group_by_class(std::move(samples));
    const std::size_t n_classes = by_class.size();
    if (n_classes < split.base_classes) {
        throw ConfigError("file has " + std::to_string(n_classes) + " classes, base is " +
                          std::to_string(split.base_classes));
    }
    const std::size_t rest = n_classes - split.base_classes;
    if (rest > 0 && (split.inc_classes < 1 || rest % split.inc_classes != 0)) {
        throw ConfigError("class count " + std::to_string(n_classes) +
                          " does not fit B-" + std::to_string(split.base_classes) + " Inc-" +
                          std::to_string(split.inc_classes));
    }
    const std::size_t n_tasks = 1 + (rest > 0 ? rest / split.inc_classes : 0);

    std::vector<std::uint32_t> class_order;
    class_order.reserve(n_classes);
    for (const auto& [c, _] : by_class) class_order.push_back(c);  // map: already sorted

    std::vector<TaskDataset> tasks(n_tasks);
    std::size_t next = 0;
    for (std::size_t t = 1; t <= n_tasks; ++t) {
        TaskDataset& task = tasks[t - 1];
        task.task_id = static_cast<std::uint32_t>(t);
        const std::size_t count = t == 1 ? split.base_classes : split.inc_classes;
        for (std::size_t k = 0; k < count; ++k, ++next) {
            std::vector<Sample>& rows = by_class[class_order[next]];
            if (rows.size() < 2) {
                throw DataError("class " + std::to_string(class_order[next]) +
                                " has fewer than 2 samples");
            }
            const std::size_t n_eval = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::llround(split.eval_fraction * double(rows.size()))));
            if (n_eval >= rows.size()) {
                throw DataError("class " + std::to_string(class_order[next]) +
                                " leaves no training samples after the eval split");
            }
            const std::size_t n_train = rows.size() - n_eval;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                (i < n_train ? task.train_idx : task.eval_idx).push_back(task.samples.size());
                task.samples.push_back(std::move(rows[i]));
            }
        }
    }
    return TaskStream(std::move(tasks));
}

EmbeddingInfo validate_embedding_file(const std::string& path) {
    std::vector<Sample> samples =
        looks_binary(path) ? read_embedding_binary(path) : read_embedding_csv(path);
    if (samples.empty()) throw DataError(path + ": no records");
    EmbeddingInfo info;
    info.n = samples.size();
    info.dim = samples.front().x.size();
    auto by_class = group_by_class(std::move(samples));
    info.n_classes = by_class.size();
    info.min_class_count = SIZE_MAX;
    for (const auto& [c, rows] : by_class) {
        info.min_class_count = std::min(info.min_class_count, rows.size());
        if (rows.size() < 2) {
            throw DataError(path + ": class " + std::to_string(c) + " has fewer than 2 samples");
        }
    }
    return info;
}

}  // namespace acmap
