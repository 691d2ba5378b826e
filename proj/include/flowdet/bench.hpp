#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "flowdet/detectors.hpp"
#include "flowdet/flow.hpp"
#include "flowdet/mimo.hpp"

namespace flowdet::bench {

struct DetectorSpec {
    det::DetectorKind kind = det::DetectorKind::kEmle;
    int T = 30;
    int E = 1;

    std::string name() const;                         // e.g. "ggamp30_manfe2"
    static DetectorSpec parse(const std::string& s);  // inverse of name()
    bool needs_flow() const;
};

enum class SweepAxis { kSnr, kAlpha };

struct BenchPlan {
    mimo::MimoScenario scenario;  // template; axis value overrides snr or alpha
    SweepAxis axis = SweepAxis::kSnr;
    std::vector<double> axis_values;
    std::vector<DetectorSpec> detectors;
    std::size_t frames = 100000;
    std::uint64_t base_seed = 1;
    std::string csv_path;
    int threads = 1;

    void validate() const;
    mimo::MimoScenario scenario_at(std::size_t point_index) const;
};

struct BerRecord {
    std::string detector;
    std::string family;
    double alpha = 0.0;
    double sigma = 0.0;
    double snr_db = 0.0;
    std::size_t n_tx = 0, n_rx = 0;
    std::size_t frames = 0, bit_errors = 0;
    double ber = 0.0;
    std::size_t divergence_count = 0;
    std::uint64_t seed = 0;
    double wall_time_s = 0.0;
};

bool records_equal_ignoring_walltime(const BerRecord& a, const BerRecord& b);

// Directory of trained flows keyed by (family, parameters, snr, N, M).
class CheckpointRegistry {
  public:
    explicit CheckpointRegistry(std::string dir);

    static std::string key(const mimo::MimoScenario& sc);
    std::string path_for(const mimo::MimoScenario& sc) const;
    bool has(const mimo::MimoScenario& sc) const;
    const flow::FlowParams& load(const mimo::MimoScenario& sc);

    // Trains the flow for this scenario at desk scale and stores it.
    const flow::FlowParams& train_and_store(const mimo::MimoScenario& sc,
                                            std::size_t train_samples = 100000,
                                            std::size_t test_samples = 20000,
                                            std::size_t epochs = 15, bool verbose = false);

    const std::string& dir() const { return dir_; }

  private:
    std::string dir_;
    std::map<std::string, flow::Checkpoint> cache_;
};

BerRecord run_point(const BenchPlan& plan, std::size_t point_index, const DetectorSpec& spec,
                    CheckpointRegistry& registry);

// Full grid; resumable from an existing CSV (completed (detector, point)
// rows are kept, failures re-run). Point failures append "# error,..."
// comment lines and the sweep continues.
std::vector<BerRecord> run_sweep(const BenchPlan& plan, CheckpointRegistry& registry);

inline constexpr const char* kCsvHeader =
    "detector,family,alpha,sigma,snr_db,n_tx,n_rx,frames,bit_errors,ber,divergence_count,seed,"
    "wall_time_s";

void write_csv(const std::string& path, std::span<const BerRecord> records,
               std::span<const std::string> error_lines = {});
struct CsvContent {
    std::vector<BerRecord> records;
    std::vector<std::string> error_lines;
};
CsvContent read_csv(const std::string& path);

// Presets reproducing the benchmark sweeps at desk scale.
std::vector<std::string> preset_names();
BenchPlan preset_plan(const std::string& name);

// SVG with a log BER axis, one polyline per detector. Zero BER values are
// drawn at the 1/(frames*bits) floor with an annotation.
void emit_plot(const std::string& csv_path, SweepAxis axis, const std::string& out_path);

}  // namespace flowdet::bench
