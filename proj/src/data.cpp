#include "credassign/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "credassign/errors.hpp"

namespace credassign {

const std::array<const char*, kNumClasses> kClassNames = {
    "airplane", "automobile", "bird", "cat",  "deer",
    "dog",      "frog",       "horse", "ship", "truck",
};

int class_id_from_name(const std::string& name) {
    for (int i = 0; i < kNumClasses; ++i)
        if (name == kClassNames[i]) return i;
    if (!name.empty() && std::all_of(name.begin(), name.end(),
                                     [](unsigned char c) { return std::isdigit(c); })) {
        const int id = std::stoi(name);
        if (id >= 0 && id < kNumClasses) return id;
    }
    throw ConfigError("unknown class '" + name + "' (use a class name or 0-9)");
}

Dataset load_batch_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    in.seekg(0, std::ios::end);
    const std::streamoff size = in.tellg();
    in.seekg(0, std::ios::beg);
    if (size <= 0 || size % kRecordBytes != 0)
        throw FormatError("'" + path + "': size " + std::to_string(size) +
                          " is not a multiple of " + std::to_string(kRecordBytes));
    const int n = static_cast<int>(size / kRecordBytes);

    Dataset ds;
    ds.n = n;
    ds.labels.resize(n);
    ds.pixels.resize(static_cast<std::size_t>(n) * kImageBytes);
    for (int i = 0; i < n; ++i) {
        std::uint8_t label = 0;
        in.read(reinterpret_cast<char*>(&label), 1);
        in.read(reinterpret_cast<char*>(ds.pixels.data() +
                                        static_cast<std::size_t>(i) * kImageBytes),
                kImageBytes);
        if (!in) throw IoError("'" + path + "': short read at record " + std::to_string(i));
        if (label >= kNumClasses)
            throw FormatError("'" + path + "': record " + std::to_string(i) + " has label " +
                              std::to_string(int(label)));
        ds.labels[i] = label;
    }
    return ds;
}

Dataset load_batch_files(const std::vector<std::string>& paths) {
    Dataset all;
    for (const auto& p : paths) {
        Dataset part = load_batch_file(p);
        all.n += part.n;
        all.labels.insert(all.labels.end(), part.labels.begin(), part.labels.end());
        all.pixels.insert(all.pixels.end(), part.pixels.begin(), part.pixels.end());
    }
    return all;
}

Dataset load_train_set(const std::string& dir) {
    std::vector<std::string> paths;
    for (int i = 1; i <= 5; ++i) paths.push_back(dir + "/data_batch_" + std::to_string(i) + ".bin");
    return load_batch_files(paths);
}

Dataset load_test_set(const std::string& dir) { return load_batch_file(dir + "/test_batch.bin"); }

Split split_train_val(int n, double val_fraction, std::uint64_t seed) {
    if (n <= 0) throw DomainError("split: empty dataset");
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw DomainError("split: val_fraction must be in [0,1)");
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    for (int i = n - 1; i > 0; --i) {
        const int j = rng.uniform_int(0, i);
        std::swap(order[i], order[j]);
    }
    const int n_val = static_cast<int>(val_fraction * n);
    Split s;
    s.train.assign(order.begin(), order.end() - n_val);
    s.val.assign(order.end() - n_val, order.end());
    return s;
}

std::uint64_t index_digest(const std::vector<int>& idx) {
    std::uint64_t h = 14695981039346656037ull;
    for (int v : idx) {
        std::uint32_t u = static_cast<std::uint32_t>(v);
        for (int b = 0; b < 4; ++b) {
            h ^= (u >> (8 * b)) & 0xffu;
            h *= 1099511628211ull;
        }
    }
    return h;
}

namespace {

void crop_into(const std::uint8_t* rec, int off_y, int off_x, bool flip, float* out) {
    for (int c = 0; c < 3; ++c) {
        const std::uint8_t* plane = rec + c * kImageSide * kImageSide;
        const float mean = kChannelMean[static_cast<std::size_t>(c)];
        const float inv_std = 1.0f / kChannelStd[static_cast<std::size_t>(c)];
        for (int y = 0; y < kCropSide; ++y) {
            const std::uint8_t* row = plane + (y + off_y) * kImageSide + off_x;
            for (int x = 0; x < kCropSide; ++x) {
                const int sx = flip ? kCropSide - 1 - x : x;
                *out++ = (static_cast<float>(row[sx]) * (1.0f / 255.0f) - mean) * inv_std;
            }
        }
    }
}

void check_batch_args(const Dataset& ds, const std::vector<int>& idx, std::size_t first,
                      int count) {
    if (count <= 0) throw DomainError("batch: count must be positive");
    if (first + static_cast<std::size_t>(count) > idx.size())
        throw DimensionError("batch: index range out of bounds");
    if (ds.n == 0) throw DomainError("batch: empty dataset");
}

} // namespace

void fill_eval_batch(const Dataset& ds, const std::vector<int>& idx, std::size_t first,
                     int count, Tensor& out, std::vector<int>& labels) {
    check_batch_args(ds, idx, first, count);
    out = Tensor({count, 3, kCropSide, kCropSide});
    labels.resize(static_cast<std::size_t>(count));
    const int off = (kImageSide - kCropSide) / 2;
    for (int i = 0; i < count; ++i) {
        const int r = idx[first + static_cast<std::size_t>(i)];
        crop_into(ds.record(r), off, off, false,
                  out.ptr() + static_cast<std::size_t>(i) * 3 * kCropSide * kCropSide);
        labels[static_cast<std::size_t>(i)] = ds.labels[static_cast<std::size_t>(r)];
    }
}

void fill_train_batch(const Dataset& ds, const std::vector<int>& idx, std::size_t first,
                      int count, Rng& rng, Tensor& out, std::vector<int>& labels) {
    check_batch_args(ds, idx, first, count);
    out = Tensor({count, 3, kCropSide, kCropSide});
    labels.resize(static_cast<std::size_t>(count));
    const int max_off = kImageSide - kCropSide;
    for (int i = 0; i < count; ++i) {
        const int r = idx[first + static_cast<std::size_t>(i)];
        const int oy = rng.uniform_int(0, max_off);
        const int ox = rng.uniform_int(0, max_off);
        const bool flip = rng.coin_flip();
        crop_into(ds.record(r), oy, ox, flip,
                  out.ptr() + static_cast<std::size_t>(i) * 3 * kCropSide * kCropSide);
        labels[static_cast<std::size_t>(i)] = ds.labels[static_cast<std::size_t>(r)];
    }
}

std::vector<int> class_indices(const Dataset& ds, int class_id) {
    if (class_id < 0 || class_id >= kNumClasses)
        throw DomainError("class id out of range: " + std::to_string(class_id));
    std::vector<int> out;
    for (int i = 0; i < ds.n; ++i)
        if (ds.labels[static_cast<std::size_t>(i)] == class_id) out.push_back(i);
    return out;
}

} // namespace credassign
