// rfshift command-line runner.
//
// Subcommands:
//   sweep         — run a configured experiment sweep, write the results CSV
//   kernel-verify — closed-form kernel vs linearized surrogate across p
//   spectra-audit — eigenvalue-ratio report for a baseline/shifted pair
//   diagnose      — benign-overfitting and high-dimension diagnostics

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "rfshift/config.hpp"
#include "rfshift/spectrum.hpp"
#include "rfshift/sweep.hpp"

namespace {

rfshift::Spectrum resolve_spectrum(const std::string& name, int p, int n, double s) {
    if (name.rfind("file:", 0) == 0) return rfshift::load_spectrum(name.substr(5));
    if (name == "example1") return rfshift::make_example_spectrum(rfshift::ExampleKind::example1, n, s);
    if (name == "example2") return rfshift::make_example_spectrum(rfshift::ExampleKind::example2, n);
    if (name == "sim1") return rfshift::make_example_spectrum(rfshift::ExampleKind::sim1, p);
    if (name == "sim2") return rfshift::make_example_spectrum(rfshift::ExampleKind::sim2, p);
    throw std::runtime_error("unknown spectrum '" + name + "'");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"random-feature regression under covariate shift"};
    app.require_subcommand(1);

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "run an experiment sweep");
    std::string cfg_path, out_path = "sweep.csv";
    int workers = 1;
    std::optional<std::uint64_t> seed_override;
    sweep_cmd->add_option("--config", cfg_path, "config file path")->required();
    sweep_cmd->add_option("--out", out_path, "output CSV path");
    sweep_cmd->add_option("--workers", workers, "worker thread count");
    sweep_cmd->add_option("--seed", seed_override, "master seed override");

    // kernel-verify
    auto* kv_cmd = app.add_subcommand("kernel-verify", "kernel linearization audit");
    std::vector<int> p_values{256, 1024, 4096};
    int kv_n = 4;
    std::string kv_spec = "example2";
    std::uint64_t kv_seed = 1;
    std::string kv_out = "kernel_verify.csv";
    bool kv_alt_reading = false;
    kv_cmd->add_option("--p-values", p_values, "spectrum lengths to audit")->delimiter(',');
    kv_cmd->add_option("--n", kv_n, "number of sample points");
    kv_cmd->add_option("--spectrum", kv_spec, "spectrum family (example2, sim1, sim2, identity)");
    kv_cmd->add_option("--seed", kv_seed, "draw seed");
    kv_cmd->add_option("--out", kv_out, "output CSV path");
    kv_cmd->add_flag("--effective-rank-reading", kv_alt_reading,
                     "use the effective-rank reading of the rank-one coefficient");

    // spectra-audit
    auto* audit_cmd = app.add_subcommand("spectra-audit", "eigenvalue-ratio report");
    std::string base_path, shifted_path, audit_out = "spectra_audit.csv";
    double audit_b = 1.0, audit_tau = 1.0;
    int audit_n = 40;
    audit_cmd->add_option("--baseline", base_path, "baseline spectrum file")->required();
    audit_cmd->add_option("--shifted", shifted_path, "shifted spectrum file")->required();
    audit_cmd->add_option("--out", audit_out, "output path");
    audit_cmd->add_option("--b", audit_b, "critical-index constant b");
    audit_cmd->add_option("--n", audit_n, "sample count for the k* summary");
    audit_cmd->add_option("--tau", audit_tau, "shift strength for the constraint checks");

    // diagnose
    auto* diag_cmd = app.add_subcommand("diagnose", "spectrum diagnostics");
    std::string diag_spec = "sim1";
    int diag_p = 40, diag_n = 40, diag_m = 40;
    double diag_b = 1.0, diag_xi = 0.5, diag_s = 0.5;
    diag_cmd->add_option("--spectrum", diag_spec, "sim1, sim2, example1, example2, or file:PATH");
    diag_cmd->add_option("--p", diag_p, "dimension for sim spectra");
    diag_cmd->add_option("--n", diag_n, "sample count");
    diag_cmd->add_option("--m", diag_m, "feature count");
    diag_cmd->add_option("--b", diag_b, "critical-index constant b");
    diag_cmd->add_option("--xi", diag_xi, "tail-ratio exponent");
    diag_cmd->add_option("--s", diag_s, "example1 parameter s");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sweep_cmd->parsed()) {
            rfshift::ParsedConfig parsed = rfshift::parse_config(cfg_path);
            for (const auto& warning : parsed.warnings)
                std::cerr << "warning: " << warning << "\n";
            if (seed_override) parsed.config.master_seed = *seed_override;
            std::cerr << "resolved config:\n" << rfshift::serialize_config(parsed.config);
            const rfshift::SweepResult result = rfshift::run_sweep(parsed.config, workers);
            rfshift::write_sweep_csv(result, out_path);
            std::cerr << "wrote " << result.rows.size() << " rows to " << out_path << "\n";
        } else if (kv_cmd->parsed()) {
            const auto reading = kv_alt_reading ? rfshift::SigmaSqReading::effective_rank
                                                : rfshift::SigmaSqReading::trace;
            rfshift::kernel_verify(p_values, kv_n, kv_spec, kv_seed, kv_out, reading);
            std::cerr << "wrote " << kv_out << "\n";
        } else if (audit_cmd->parsed()) {
            rfshift::spectral_ratio_report(base_path, shifted_path, audit_out, audit_b, audit_n,
                                           audit_tau);
            std::cerr << "wrote " << audit_out << "\n";
        } else if (diag_cmd->parsed()) {
            const rfshift::Spectrum spec =
                resolve_spectrum(diag_spec, diag_p, diag_n, diag_s);
            const auto benign = rfshift::benign_diagnostics(spec, diag_n, diag_b, diag_xi);
            const auto highdim = rfshift::highdim_diagnostics(spec, diag_n, diag_m);
            std::cout << "p = " << spec.size() << ", trace = " << spec.trace() << "\n";
            std::cout << "r0/n = " << benign.r0_over_n << "\n";
            std::cout << "k*(b=" << diag_b << ") = "
                      << (benign.kstar ? std::to_string(*benign.kstar) : "undefined") << "\n";
            if (benign.kstar_over_n) std::cout << "k*/n = " << *benign.kstar_over_n << "\n";
            std::cout << "tail ratio (xi=" << diag_xi << ") = " << benign.tail_ratio << "\n";
            std::cout << "n <= p^{1/4}: " << (highdim.n_le_p_quarter ? "yes" : "no")
                      << " (margin " << highdim.p_quarter_margin << ")\n";
            std::cout << "tr/n^{3/4} = " << highdim.trace_margin << " ("
                      << (highdim.trace_ok ? "clears" : "below") << " threshold "
                      << highdim.threshold << ")\n";
            std::cout << "n/ln m = " << highdim.log_m_margin << " ("
                      << (highdim.log_m_ok ? "clears" : "below") << " threshold "
                      << highdim.threshold << ")\n";
            std::cout << "m >= p: " << (highdim.m_ge_p ? "yes" : "no") << " (margin "
                      << highdim.m_margin << ")\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
