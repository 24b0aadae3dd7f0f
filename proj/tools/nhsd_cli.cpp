// Command-line front end: spectra, spectral-geometry scans, non-Bloch
// analysis, the cavity digital twin, hologram synthesis, and the bundled
// figure recipes.  Exit codes: 0 success, 2 config error, 3 numerical
// failure, 4 acceptance-check failure.

#include <CLI11.hpp>
#include <iostream>

#include "nhsd/recipes.hpp"

using namespace nhsd;

namespace {

RunConfig load_config(const std::string& path) {
    if (path.empty()) throw ConfigError("missing --config");
    return parse_config(path);
}

std::vector<double> dw_grid_of(const RunConfig& cfg) {
    std::vector<double> dw(static_cast<std::size_t>(cfg.dw_points));
    for (int i = 0; i < cfg.dw_points; ++i)
        dw[static_cast<std::size_t>(i)] = -0.5 + static_cast<double>(i) / cfg.dw_points;
    return dw;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"non-Bloch band engine"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", format = "csv", recipe_name, fit_input,
                holo_out = "hologram.pgm";
    unsigned jobs = 1;
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    double mu = 0.0, k_val = 0.0, e_re = 0.0, e_im = 0.0;
    double mu_min = -0.5, mu_max = 0.0;
    int points = 51, n_cells = 0;
    double beta_re = 1.0, beta_im = 0.0, grating = 16.0;
    int n_modes = 20, holo_size = 512, holo_bits = 8;

    const auto add_common = [&](CLI::App* s) {
        s->add_option("--config", config_path, "flat key-value config file");
        s->add_option("--out-dir", out_dir, "output directory");
        s->add_option("--jobs", jobs, "worker count");
        s->add_option("--seed", seed_override, "override the config seed")
            ->each([&](const std::string&) { seed_set = true; });
        s->add_option("--format", format, "csv or json")
            ->check(CLI::IsMember({"csv", "json"}));
        return s;
    };

    auto* sc_spectrum = add_common(app.add_subcommand("spectrum", "band loops at fixed mu"));
    sc_spectrum->add_option("--mu", mu);

    auto* sc_wass = add_common(app.add_subcommand("wasserstein", "metric curve over mu"));
    sc_wass->add_option("--mu-min", mu_min);
    sc_wass->add_option("--mu-max", mu_max);
    sc_wass->add_option("--points", points);

    auto* sc_ronkin = add_common(app.add_subcommand("ronkin", "Ronkin cut over mu"));
    sc_ronkin->add_option("--e-re", e_re);
    sc_ronkin->add_option("--e-im", e_im);
    sc_ronkin->add_option("--mu-min", mu_min);
    sc_ronkin->add_option("--mu-max", mu_max);
    sc_ronkin->add_option("--points", points);

    auto* sc_gbz = add_common(app.add_subcommand("gbz", "extract mu_GBZ / GBZ samples"));
    sc_gbz->add_option("--mu-min", mu_min);
    sc_gbz->add_option("--mu-max", mu_max);

    auto* sc_wind = add_common(app.add_subcommand("winding", "spectral winding number"));
    sc_wind->add_option("--mu", mu);
    sc_wind->add_option("--e-re", e_re)->required();
    sc_wind->add_option("--e-im", e_im);

    auto* sc_obc = add_common(app.add_subcommand("obc", "open-boundary spectrum"));
    sc_obc->add_option("--n-cells", n_cells);

    auto* sc_inter = add_common(app.add_subcommand("intersections", "loop self-intersections"));
    sc_inter->add_option("--mu", mu);

    auto* sc_synth = add_common(app.add_subcommand("synth", "synthesize one transmission trace"));
    sc_synth->add_option("--mu", mu);
    sc_synth->add_option("--k", k_val);

    auto* sc_fit = add_common(app.add_subcommand("fit", "fit eigenenergies from a trace CSV"));
    sc_fit->add_option("--input", fit_input)->required();

    auto* sc_scan = add_common(app.add_subcommand("scan", "full (mu, k) scan pipeline"));

    auto* sc_holo = app.add_subcommand("hologram", "phase-only hologram synthesis");
    sc_holo->add_option("--beta-re", beta_re);
    sc_holo->add_option("--beta-im", beta_im);
    sc_holo->add_option("--n-modes", n_modes);
    sc_holo->add_option("--size", holo_size);
    sc_holo->add_option("--grating", grating);
    sc_holo->add_option("--out", holo_out);
    sc_holo->add_option("--bits", holo_bits);

    auto* sc_recipe = add_common(app.add_subcommand("recipe", "figure-reproduction pipeline"));
    sc_recipe->add_option("--name", recipe_name, "fig1 | fig3 | fig4 | fig5")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        std::filesystem::create_directories(out_dir);
        const auto out = [&](const std::string& f) {
            return (std::filesystem::path(out_dir) / f).string();
        };

        if (sc_spectrum->parsed()) {
            RunConfig cfg = load_config(config_path);
            const auto [a, b] =
                sample_band_loop(cfg.model, mu, cfg.n_k, exceptional_mu_values(cfg.model));
            write_spectra_csv(out("spectrum_" + detail::mu_tag(mu) + ".csv"), a, b);
        } else if (sc_wass->parsed()) {
            RunConfig cfg = load_config(config_path);
            CsvWriter w(out("wasserstein.csv"), {"mu", "G_integral", "G_area"});
            for (int i = 0; i < points; ++i) {
                const double m = mu_min + (mu_max - mu_min) * i / std::max(points - 1, 1);
                try {
                    w.row({m,
                           wasserstein_metric(cfg.model, m, cfg.n_k, WassersteinMethod::Integral),
                           wasserstein_metric(cfg.model, m, cfg.n_k,
                                              WassersteinMethod::AreaDerivative)});
                } catch (const SingularityError&) {
                    // skip points on EP radii
                }
            }
        } else if (sc_ronkin->parsed()) {
            RunConfig cfg = load_config(config_path);
            CsvWriter w(out("ronkin_cut.csv"), {"mu", "V"});
            for (int i = 0; i < points; ++i) {
                const double m = mu_min + (mu_max - mu_min) * i / std::max(points - 1, 1);
                w.row({m, ronkin(cfg.model, Complex(e_re, e_im), m, cfg.n_k)});
            }
        } else if (sc_gbz->parsed()) {
            RunConfig cfg = load_config(config_path);
            nlohmann::ordered_json j;
            if (cfg.model.delta2 == 0.0) {
                const auto r = extract_mu_gbz(cfg.model, mu_min, mu_max, 15, cfg.n_k);
                j["mu_gbz"] = r.mu_gbz;
                j["ep_nearby_warning"] = r.ep_nearby;
                j["gbz_betas"] = detail::complex_list(gbz_circle(cfg.model, r.mu_gbz, 64).betas);
                std::cout << "mu_gbz = " << fmt_double(r.mu_gbz) << "\n";
            } else {
                std::vector<double> mus;
                for (double m = mu_min; m <= mu_max + 1e-12; m += 0.005) mus.push_back(m);
                const auto [cloud, gbz] =
                    trace_obc_via_intersections(cfg.model, mus, std::max(cfg.n_k, 1024), jobs);
                j["traced_obc_points"] = detail::complex_list(cloud.eigenvalues);
                j["gbz_betas"] = detail::complex_list(gbz.betas);
                std::cout << "traced " << gbz.betas.size() << " GBZ samples\n";
            }
            write_json(out("gbz.json"), j);
        } else if (sc_wind->parsed()) {
            RunConfig cfg = load_config(config_path);
            const auto [a, b] =
                sample_band_loop(cfg.model, mu, cfg.n_k, exceptional_mu_values(cfg.model));
            std::cout << winding_number(a, b, Complex(e_re, e_im)) << "\n";
        } else if (sc_obc->parsed()) {
            RunConfig cfg = load_config(config_path);
            const auto s = obc_spectrum(cfg.model, n_cells > 0 ? n_cells : cfg.n_cells);
            CsvWriter w(out("obc_spectrum.csv"), {"re", "im"});
            for (const Complex& z : s.eigenvalues) w.row({z.real(), z.imag()});
            if (s.conditioning_warning)
                std::cerr << "warning: skin-effect conditioning marginal at this size\n";
        } else if (sc_inter->parsed()) {
            RunConfig cfg = load_config(config_path);
            const auto [a, b] = sample_band_loop(cfg.model, mu, std::max(cfg.n_k, 1024),
                                                 exceptional_mu_values(cfg.model));
            auto pts = self_intersections(cfg.model, a, b);
            if (a.closed_after == LoopClosure::TwoPi) {
                auto more = self_intersections(cfg.model, b, a);
                pts.insert(pts.end(), more.begin(), more.end());
            }
            write_intersections_csv(out("intersections_" + detail::mu_tag(mu) + ".csv"), pts);
            std::cout << pts.size() << " crossings\n";
        } else if (sc_synth->parsed()) {
            RunConfig cfg = load_config(config_path);
            if (seed_set) cfg.noise.seed = seed_override;
            const auto tr = synth_transmission(cfg.model, cfg.cavity,
                                               momentum_to_beta(k_val, mu), dw_grid_of(cfg),
                                               cfg.noise);
            CsvWriter w(out("trace.csv"), {"dw", "intensity"});
            for (std::size_t i = 0; i < tr.detunings.size(); ++i)
                w.row({tr.detunings[i], tr.intensities[i]});
        } else if (sc_fit->parsed()) {
            RunConfig cfg = load_config(config_path);
            std::ifstream is(fit_input);
            if (!is) throw ConfigError("cannot open trace: " + fit_input);
            TransmissionTrace tr;
            std::string line;
            std::getline(is, line);  // header
            while (std::getline(is, line)) {
                std::stringstream ss(line);
                std::string tok;
                std::vector<double> cols;
                while (std::getline(ss, tok, ',')) cols.push_back(std::stod(tok));
                if (cols.size() >= 2) {
                    tr.detunings.push_back(cols[cols.size() - 2]);
                    tr.intensities.push_back(cols.back());
                }
            }
            const FitResult r = extract_eigenenergies(tr, cfg.cavity);
            nlohmann::ordered_json j;
            j["outcome"] = r.outcome == FitOutcome::Ok ? "ok" : "merged_peak_fallback";
            j["plus"] = {{"re_E", r.plus.re_E}, {"im_E", r.plus.im_E},
                         {"residual", r.plus.fit_residual}};
            j["minus"] = {{"re_E", r.minus.re_E}, {"im_E", r.minus.im_E},
                          {"residual", r.minus.fit_residual}};
            write_json(out("fit.json"), j);
            std::cout << j.dump(2) << "\n";
        } else if (sc_scan->parsed()) {
            RunConfig cfg = load_config(config_path);
            if (seed_set) cfg.noise.seed = seed_override;
            write_json(out("manifest.json"), config_manifest(cfg));
            const auto rows = scan_experiment(cfg.model, cfg.cavity, cfg.mu_list, cfg.n_k,
                                              dw_grid_of(cfg), cfg.noise, jobs);
            for (const auto& row : rows) {
                const std::string tag = detail::mu_tag(row.mu);
                write_trace_csv(out("trace_" + tag + ".csv"), row.points);
                write_spectra_csv(out("fitted_bands_" + tag + ".csv"), row.fitted_plus,
                                  row.fitted_minus);
            }
        } else if (sc_holo->parsed()) {
            const Complex beta(beta_re, beta_im);
            const FieldRaster field = target_field(beta, n_modes, holo_size, holo_size);
            const double clip = default_clip(field);
            const HologramRaster holo = hologram_phase(field, clip, grating);
            export_hologram_pgm(holo, holo_out, holo_bits);
            std::cout << "fidelity = " << fmt_double(diffraction_oracle(holo, field)) << "\n";
        } else if (sc_recipe->parsed()) {
            RunConfig cfg = load_config(config_path);
            if (seed_set) cfg.noise.seed = seed_override;
            const RunReport rep = run_recipe(recipe_name, cfg, out_dir, jobs);
            for (const auto& [name, good] : rep.checks)
                std::cout << (good ? "PASS " : "FAIL ") << name << "\n";
            if (!rep.ok()) return 4;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
