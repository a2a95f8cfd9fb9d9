#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "credassign/rng.hpp"
#include "credassign/tensor.hpp"

namespace credassign {

inline constexpr int kImageSide = 32;
inline constexpr int kCropSide = 24;
inline constexpr int kNumClasses = 10;
inline constexpr int kImageBytes = 3 * kImageSide * kImageSide;
inline constexpr int kRecordBytes = 1 + kImageBytes; // label byte + CHW pixel planes

// Per-channel statistics the pixel values are standardized with.
inline constexpr std::array<float, 3> kChannelMean{0.4914f, 0.4822f, 0.4465f};
inline constexpr std::array<float, 3> kChannelStd{0.2470f, 0.2435f, 0.2616f};

extern const std::array<const char*, kNumClasses> kClassNames;

/// "dog" or "5" -> 5. Throws ConfigError on anything else.
int class_id_from_name(const std::string& name);

/// Images stay in their original byte form; batches are cropped and
/// normalized on the fly.
struct Dataset {
    int n = 0;
    std::vector<std::uint8_t> pixels; // n * kImageBytes, CHW per record
    std::vector<int> labels;

    const std::uint8_t* record(int i) const {
        return pixels.data() + static_cast<std::size_t>(i) * kImageBytes;
    }
};

/// Readers for the binary batch format: fixed-size records of one label byte
/// followed by 32x32 R, G, B planes. Throws IoError for unreadable paths and
/// FormatError for truncated files or out-of-range labels.
Dataset load_batch_file(const std::string& path);
Dataset load_batch_files(const std::vector<std::string>& paths);
Dataset load_train_set(const std::string& dir); // data_batch_1.bin .. data_batch_5.bin
Dataset load_test_set(const std::string& dir);  // test_batch.bin

struct Split {
    std::vector<int> train, val;
};

/// Fisher-Yates shuffle of [0, n) under the given seed; the last
/// floor(val_fraction * n) shuffled indices form the validation side.
Split split_train_val(int n, double val_fraction, std::uint64_t seed);

/// Order-sensitive digest of an index list (for pinning splits in tests).
std::uint64_t index_digest(const std::vector<int>& idx);

/// Center-cropped, normalized eval batch: out[count, 3, 24, 24] from
/// ds records idx[first .. first+count).
void fill_eval_batch(const Dataset& ds, const std::vector<int>& idx, std::size_t first,
                     int count, Tensor& out, std::vector<int>& labels);

/// Training batch with augmentation. Per sample, in batch order, the rng is
/// consumed as: crop row offset in [0,8], crop col offset in [0,8], flip coin.
void fill_train_batch(const Dataset& ds, const std::vector<int>& idx, std::size_t first,
                      int count, Rng& rng, Tensor& out, std::vector<int>& labels);

std::vector<int> class_indices(const Dataset& ds, int class_id);

} // namespace credassign
