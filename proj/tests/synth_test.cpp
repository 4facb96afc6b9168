#include "nrsar/synth.hpp"

#include <gtest/gtest.h>

#include "temp_dir.hpp"

namespace {

using namespace nrsar;
using nrsar::testing::TempDir;

std::vector<unsigned char> bytes_of(const std::filesystem::path& p) { return detail::read_file_bytes(p); }

TEST(Synth, GridSizeAndValidManifest) {
    TempDir dir("synth_grid");
    SynthConfig c;
    c.n_songs = 40;
    c.duration_s = 0.6;
    c.n_algorithms = 8;
    const auto m = synthesize_corpus(dir.path(), c);
    EXPECT_EQ(m.entries.size(), 320u);
    const auto loaded = load_manifest(dir / "manifest.json");
    EXPECT_EQ(loaded.entries.size(), 320u);
    EXPECT_EQ(loaded.songs("train").size(), 28u);
    EXPECT_EQ(loaded.songs("test").size(), 12u);
    EXPECT_EQ(loaded.algorithms().size(), 8u);
    EXPECT_EQ(loaded.algorithms().front(), "algo01");
    const auto clip = read_wav(loaded.resolve(loaded.entries[0].estimate));
    EXPECT_EQ(clip.length(), static_cast<std::size_t>(0.6 * 44100));
}

TEST(Synth, SameSeedIsByteIdentical) {
    TempDir a("synth_a"), b("synth_b"), c("synth_c");
    SynthConfig cfg;
    cfg.n_songs = 3;
    cfg.duration_s = 1.0;
    cfg.n_algorithms = 2;
    cfg.seed = 11;
    const auto m = synthesize_corpus(a.path(), cfg);
    synthesize_corpus(b.path(), cfg);
    for (const auto& e : m.entries) {
        EXPECT_EQ(bytes_of(a / e.estimate.string()), bytes_of(b / e.estimate.string()));
        for (const auto& r : e.references) EXPECT_EQ(bytes_of(a / r.string()), bytes_of(b / r.string()));
    }
    EXPECT_EQ(bytes_of(a / "manifest.json"), bytes_of(b / "manifest.json"));
    cfg.seed = 12;
    synthesize_corpus(c.path(), cfg);
    EXPECT_NE(bytes_of(a / m.entries[0].estimate.string()), bytes_of(c / m.entries[0].estimate.string()));
}

TEST(Synth, ProfilesSpreadArtifactSnr) {
    EXPECT_DOUBLE_EQ(degradation_profile(0, 8).artifact_snr_db, -6.0);
    EXPECT_DOUBLE_EQ(degradation_profile(7, 8).artifact_snr_db, 22.0);
    for (std::size_t k = 1; k < 8; ++k)
        EXPECT_GT(degradation_profile(k, 8).artifact_snr_db, degradation_profile(k - 1, 8).artifact_snr_db);
    EXPECT_TRUE(std::isfinite(degradation_profile(0, 1).artifact_snr_db));
}

TEST(Synth, SongStemsAreNonSilentEverywhere) {
    // every metric window must carry target energy, otherwise it is masked
    const auto s = make_song(4 * 44100, 44100, 3);
    const auto grid = label_grid(s.vocals.length(), 44100, 0.464, 0.117);
    for (std::size_t k = 0; k < grid.frames; ++k) {
        const auto w = s.vocals.channel(0).subspan(grid.start(k), grid.window);
        EXPECT_GT(energy(w) / static_cast<double>(w.size()), 1e-6);
    }
}

TEST(Synth, RejectsBadConfig) {
    SynthConfig c;
    c.n_songs = 1;
    EXPECT_THROW(c.validate(), UsageError);
    c = {};
    c.train_songs = 40;
    EXPECT_THROW(c.validate(), UsageError);
    c = {};
    c.n_algorithms = 0;
    EXPECT_THROW(c.validate(), UsageError);
}

} // namespace
