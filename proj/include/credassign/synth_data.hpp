#pragma once

#include <cstdint>
#include <string>

namespace credassign {

/// Parameters for the procedurally generated stand-in dataset. It mimics the
/// binary batch layout exactly (five train files plus one test file of
/// 3073-byte records), so every loader, split, and training path runs
/// unchanged against it.
///
/// Each image is a smooth random background with a few colored distractor
/// strokes, one class-defining glyph, and pixel noise. The glyph is an 8x8
/// bitmap rendered at its native size or pixel-doubled to 16x16, stamped at
/// a random position inside the region every 24x24 crop retains, with
/// high-contrast ink. Glyph shapes are mirror-symmetric so horizontal-flip
/// augmentation never maps one class onto another, and ink colors are drawn
/// independently of the class so the label carries no color or brightness
/// shortcut.
struct SynthConfig {
    int files = 5;          // train files, data_batch_1.bin ..
    int per_file = 10000;   // records per train file
    int test_count = 10000; // records in test_batch.bin
    std::uint64_t seed = 7;
};

/// Writes the dataset under dir (created if missing). Deterministic in cfg.
void write_synthetic_dataset(const std::string& dir, const SynthConfig& cfg);

} // namespace credassign
