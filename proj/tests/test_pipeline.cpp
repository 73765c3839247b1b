#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "support.hpp"
#include "wsi/error.hpp"
#include "wsi/pipeline.hpp"
#include "wsi/workflow.hpp"

using namespace wsi;

namespace {

constexpr int kH = 384, kW = 512;

class BlankSource : public RasterSource {
 public:
  RgbImage load(const SlideRecord&) const override { return test::solid(kH, kW, 240, 240, 240); }
  Mask load_roi_mask(const SlideRecord&) const override { return Mask(kH, kW); }
};

struct Fixture {
  DatasetManifest manifest;
  std::unique_ptr<SynthRasterSource> source;
  Config cfg;
  ModelBundle bundle;
};

// A small reference-lab corpus with trained models, shared by the tests below.
const Fixture& trained() {
  static const Fixture f = [] {
    Fixture fx;
    synth::CorpusSpec spec;
    spec.specimens_per_lab = 40;
    spec.labs = {synth::preset_lab("reference")};
    spec.seed = 21;
    spec.height = kH;
    spec.width = kW;
    fx.manifest = build_splits(synth::plan_corpus(spec), {0.6, 0.2, 0.2}, 4);
    fx.source = std::make_unique<SynthRasterSource>(spec.labs, spec.seed, kH, kW);
    fx.cfg.classifier.epochs = 200;
    fx.bundle = train_models(fx.manifest, *fx.source, fx.cfg, 1);
    return fx;
  }();
  return f;
}

StageTiming timing(std::string id, double total, bool no_roi = false) {
  StageTiming t;
  t.slide_id = std::move(id);
  t.total_ms = total;
  t.no_roi = no_roi;
  for (std::size_t s = 0; s < kNumStages; ++s) t.stage_ms[s] = total / double(kNumStages);
  return t;
}

}  // namespace

TEST(Quartiles, LinearInterpolation) {
  const auto q = quartiles({30, 10, 20});
  EXPECT_DOUBLE_EQ(q.q1, 15);
  EXPECT_DOUBLE_EQ(q.median, 20);
  EXPECT_DOUBLE_EQ(q.q3, 25);
  const auto one = quartiles({7});
  EXPECT_EQ(one.q1, 7);
  EXPECT_EQ(one.q3, 7);
  const auto four = quartiles({1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(four.q1, 1.75);
  EXPECT_DOUBLE_EQ(four.median, 2.5);
  EXPECT_THROW(quartiles({}), InvalidInput);
}

TEST(Profile, SingleSlideAndNoRoiExclusion) {
  const std::vector<StageTiming> one = {timing("a", 12)};
  const auto p = profile(one, 0.5);
  EXPECT_EQ(p.slides, 1u);
  EXPECT_EQ(p.total.median, 12);
  EXPECT_DOUBLE_EQ(p.throughput_per_hour, 7200);

  const std::vector<StageTiming> three = {timing("a", 10), timing("b", 30), timing("c", 1, true)};
  const auto q = profile(three, 1.0);
  EXPECT_EQ(q.no_roi, 1u);
  EXPECT_DOUBLE_EQ(q.total.median, 10);
  EXPECT_DOUBLE_EQ(q.median_total_with_roi, 20);
  EXPECT_THROW(profile({}, 1.0), InvalidInput);
  EXPECT_NE(format_profile(q).find("segment"), std::string::npos);
}

TEST(RunSlide, BlankSlideIsNoRoiAndSkipsClassification) {
  const auto& fx = trained();
  SlideRecord rec{"blank-1", "blank", "reference", ClassLabel::Other, "x.ppm"};
  const auto run = run_slide(rec, BlankSource{}, fx.bundle.models_for("reference"), fx.cfg, 1);
  EXPECT_EQ(run.result.status, SlideStatus::NoROI);
  EXPECT_TRUE(run.result.matrix.rows.empty());
  EXPECT_TRUE(run.timing.no_roi);
  EXPECT_EQ(run.timing.stage_ms[4], 0.0);
  EXPECT_EQ(run.timing.stage_ms[5], 0.0);
  EXPECT_GE(run.timing.total_ms, run.timing.stage_sum() - 1e-9);
}

TEST(RunSlide, UnreadableRasterBecomesErrorRecord) {
  const auto& fx = trained();
  test::TempDir dir;
  {
    std::ofstream bad(dir.path() / "bad.ppm");
    bad << "P6\n4 4\n255\nxx";
  }
  const FileRasterSource src(dir.path());
  SlideRecord rec{"s1", "p1", "reference", ClassLabel::Basaloid, "bad.ppm"};
  const auto run = run_slide(rec, src, fx.bundle.models_for("reference"), fx.cfg, 1);
  EXPECT_EQ(run.result.status, SlideStatus::Error);
  EXPECT_FALSE(run.result.error.empty());
  rec.raster_path = "missing.ppm";
  EXPECT_EQ(run_slide(rec, src, fx.bundle.models_for("reference"), fx.cfg, 1).result.status, SlideStatus::Error);
}

TEST(RunCorpus, EmptyInputAndArgumentChecks) {
  const auto& fx = trained();
  const auto run = run_corpus({}, BlankSource{}, fx.bundle, fx.cfg, 2, 1);
  EXPECT_TRUE(run.slides.empty());
  EXPECT_TRUE(run.specimens.empty());
  const std::vector<SlideRecord> dup = {{"a", "p", "reference", ClassLabel::Other, "a"},
                                        {"a", "q", "reference", ClassLabel::Other, "b"}};
  EXPECT_THROW(run_corpus(dup, BlankSource{}, fx.bundle, fx.cfg, 1, 1), InvalidInput);
  EXPECT_THROW(run_corpus({}, BlankSource{}, fx.bundle, fx.cfg, 0, 1), InvalidInput);
}

TEST(RunCorpus, IdenticalAcrossWorkerCountsAndBetterThanChance) {
  const auto& fx = trained();
  const auto test = fx.manifest.select(Split::Test);
  ASSERT_FALSE(test.empty());
  const auto a = run_corpus(test, *fx.source, fx.bundle, fx.cfg, 1, 99);
  const auto b = run_corpus(test, *fx.source, fx.bundle, fx.cfg, 4, 99);
  ASSERT_EQ(a.slides.size(), b.slides.size());
  for (std::size_t i = 0; i < a.slides.size(); ++i) {
    EXPECT_EQ(a.slides[i].slide_id, b.slides[i].slide_id);
    EXPECT_EQ(a.slides[i].status, b.slides[i].status);
    EXPECT_EQ(a.slides[i].matrix, b.slides[i].matrix);
    EXPECT_EQ(a.slides[i].score.value, b.slides[i].score.value);
  }
  EXPECT_TRUE(std::is_sorted(a.slides.begin(), a.slides.end(),
                             [](const auto& x, const auto& y) { return x.slide_id < y.slide_id; }));

  std::map<std::string, ClassLabel> truth;
  for (const auto& r : test) truth[r.specimen_id] = r.truth;
  std::size_t correct = 0, classified = 0;
  for (const auto& s : a.specimens)
    if (s.classified) {
      ++classified;
      correct += s.cls == truth.at(s.specimen_id);
    }
  ASSERT_GT(classified, 0u);
  EXPECT_GT(double(correct) / double(classified), 0.5);
}

TEST(Files, TimingsRoundTrip) {
  test::TempDir dir;
  const std::vector<StageTiming> t = {timing("a", 12.5), timing("b", 3.25, true)};
  write_timings(t, dir.path() / "t.csv");
  const auto back = read_timings(dir.path() / "t.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].slide_id, "b");
  EXPECT_TRUE(back[1].no_roi);
  EXPECT_DOUBLE_EQ(back[0].total_ms, 12.5);
}

TEST(Files, SlideResultsRoundTripAtFullPrecision) {
  SlideResult c{"s1", "p1", "lab", SlideStatus::Classified, {}, {}, ""};
  c.score.value = 0.1234567890123456789;
  c.score.cls = ClassLabel::Melanocytic;
  c.score.column_means = {0.01, 0.02, 0.1234567890123456789, 1.0 / 3};
  SlideResult n{"s2", "p1", "lab", SlideStatus::NoROI, {}, {}, ""};
  SlideResult e{"s3", "p2", "lab", SlideStatus::Error, {}, {}, "cannot read x, y"};
  test::TempDir dir;
  write_slide_results(std::vector<SlideResult>{c, n, e}, dir.path() / "s.csv");
  const auto back = read_slide_results(dir.path() / "s.csv");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[0].score.value, c.score.value);
  EXPECT_EQ(back[0].score.column_means, c.score.column_means);
  EXPECT_EQ(back[0].score.cls, ClassLabel::Melanocytic);
  EXPECT_EQ(back[1].status, SlideStatus::NoROI);
  EXPECT_EQ(back[2].status, SlideStatus::Error);
  EXPECT_EQ(back[2].error, "cannot read x; y");
}

TEST(Bundle, SaveLoadPreservesVersion) {
  const auto& fx = trained();
  ModelBundle b = fx.bundle;
  LabModels lab;
  lab.adapter = {fx.bundle.reference, fx.bundle.reference};
  lab.params = fx.bundle.base_params;
  lab.thresholds.levels = {Threshold::at(0.3), Threshold::at(0.6), Threshold::unreachable()};
  lab.validation_accuracy = 0.75;
  b.labs["lab_x"] = lab;
  test::TempDir dir;
  save_bundle(b, dir.path());
  const auto back = load_bundle(dir.path());
  EXPECT_EQ(back.version(), b.version());
  EXPECT_NE(back.version(), fx.bundle.version());
  EXPECT_EQ(back.thresholds_for("lab_x"), lab.thresholds);
  EXPECT_EQ(back.thresholds_for("unknown"), b.reference_thresholds);
  EXPECT_DOUBLE_EQ(back.labs.at("lab_x").validation_accuracy, 0.75);

  std::filesystem::remove(dir.path() / "segmenter.txt");
  try {
    load_bundle(dir.path());
    FAIL() << "expected IoError";
  } catch (const IoError& err) {
    EXPECT_NE(std::string(err.what()).find("segmenter.txt"), std::string::npos);
  }
}
