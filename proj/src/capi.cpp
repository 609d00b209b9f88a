#include "mtqs/mtqs.h"

#include <cstring>
#include <string>

#include "mtqs/exp_fitting.hpp"
#include "mtqs/model_io.hpp"
#include "mtqs/oracles.hpp"
#include "mtqs/workflows.hpp"

namespace {

thread_local std::string g_last_error;

int fail(const char* what, int code) {
  g_last_error = what;
  return code;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return MTQS_OK;
  } catch (const mtqs::ValidationError& e) {
    return fail(e.what(), MTQS_VALIDATION_FAILED);
  } catch (const std::exception& e) {
    return fail(e.what(), MTQS_ERROR);
  } catch (...) {
    return fail("unknown failure", MTQS_ERROR);
  }
}

}  // namespace

struct mtqs_model {
  mtqs::GKLSModel model;
};

extern "C" {

const char* mtqs_version(void) { return mtqs::kVersion; }

const char* mtqs_last_error(void) { return g_last_error.c_str(); }

int mtqs_run(const char* config_path, const char* output_dir, int threads,
             long seed) {
  if (!config_path) return fail("config_path is null", MTQS_ERROR);
  return guarded([&] {
    mtqs::RunOptions opts;
    opts.config_path = config_path;
    opts.output_dir = output_dir ? output_dir : ".";
    opts.threads = threads > 0 ? threads : 1;
    opts.seed = seed;
    mtqs::run_workflow(opts);
  });
}

int mtqs_model_create_from_json(const char* json_text, mtqs_model** out) {
  if (!json_text || !out) return fail("null argument", MTQS_ERROR);
  return guarded([&] {
    const mtqs::Json j = mtqs::Json::parse(json_text);
    *out = new mtqs_model{mtqs::parse_model(j)};
  });
}

int mtqs_model_create_from_file(const char* path, mtqs_model** out) {
  if (!path || !out) return fail("null argument", MTQS_ERROR);
  return guarded([&] {
    *out = new mtqs_model{mtqs::parse_model(mtqs::load_json_file(path))};
  });
}

void mtqs_model_destroy(mtqs_model* model) { delete model; }

int mtqs_model_total_dim(const mtqs_model* model, int* out) {
  if (!model || !out) return fail("null argument", MTQS_ERROR);
  *out = model->model.total_dim();
  return MTQS_OK;
}

int mtqs_multitime(const mtqs_model* model, const char* state_json,
                   const char* request_json, double* re, double* im) {
  if (!model || !state_json || !request_json || !re || !im) {
    return fail("null argument", MTQS_ERROR);
  }
  return guarded([&] {
    const int d = model->model.system().d_s;
    const mtqs::Matrix rho_s =
        mtqs::parse_state(mtqs::Json::parse(state_json), d, "state");
    const mtqs::MultiTimeRequest req =
        mtqs::parse_request(mtqs::Json::parse(request_json), d);
    mtqs::MultiTimeEvaluator ev(model->model);
    const mtqs::Complex value = ev.multitime(rho_s, req);
    *re = value.real();
    *im = value.imag();
  });
}

int mtqs_free_bath_correlation(const mtqs_model* model, int j, int jp,
                               double t, double s, double* re, double* im) {
  if (!model || !re || !im) return fail("null argument", MTQS_ERROR);
  return guarded([&] {
    const mtqs::Complex value = model->model.free_bath_two_time(
        static_cast<std::size_t>(j), static_cast<std::size_t>(jp), t, s);
    *re = value.real();
    *im = value.imag();
  });
}

int mtqs_correlation(const char* spectral_density_json, double t, double* re,
                     double* im) {
  if (!spectral_density_json || !re || !im) {
    return fail("null argument", MTQS_ERROR);
  }
  return guarded([&] {
    const mtqs::SpectralDensity sd =
        mtqs::parse_spectral_density(mtqs::Json::parse(spectral_density_json));
    const mtqs::Complex value = mtqs::correlation_analytic(sd, t);
    *re = value.real();
    *im = value.imag();
  });
}

int mtqs_fit_exponentials(const double* times, const double* re,
                          const double* im, int n, int order,
                          char** json_out) {
  if (!times || !re || !im || !json_out || n < 1) {
    return fail("null or empty input", MTQS_ERROR);
  }
  return guarded([&] {
    mtqs::CorrelationSeries series;
    for (int i = 0; i < n; ++i) {
      series.grid.push_back(times[i]);
      series.values.push_back(mtqs::Complex(re[i], im[i]));
    }
    auto [sum, report] = mtqs::matrix_pencil_fit(series, order);
    mtqs::Json terms = mtqs::Json::array();
    for (const auto& term : sum.terms) {
      terms.push_back({{"amplitude", mtqs::complex_to_json(term.amplitude)},
                       {"exponent", mtqs::complex_to_json(term.exponent)}});
    }
    mtqs::Json j;
    j["terms"] = terms;
    j["report"] = {{"model_order", report.model_order},
                   {"max_residual", report.max_residual},
                   {"rms_residual", report.rms_residual},
                   {"grid_span", report.grid_span}};
    const std::string text = j.dump(2);
    *json_out = static_cast<char*>(std::malloc(text.size() + 1));
    if (!*json_out) throw std::runtime_error("allocation failure");
    std::memcpy(*json_out, text.c_str(), text.size() + 1);
  });
}

void mtqs_string_free(char* text) { std::free(text); }

}  // extern "C"
