#include "sandformer/sandformer.h"

#include <new>
#include <string>

#include "app/app.hpp"
#include "metrics/metrics.hpp"
#include "train/checkpoint.hpp"

struct sf_options {
  sf::Options opts;
};

struct sf_image {
  sf::ImageBuffer image;
};

struct sf_model {
  sf::Model model;
};

namespace {

thread_local std::string g_last_error;

sf_status to_status(sf::ErrorCode code) {
  using sf::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument: return SF_ERR_INVALID_ARGUMENT;
    case ErrorCode::kConfig: return SF_ERR_CONFIG;
    case ErrorCode::kState: return SF_ERR_STATE;
    case ErrorCode::kIo: return SF_ERR_IO;
    case ErrorCode::kFormat: return SF_ERR_FORMAT;
    case ErrorCode::kUnsupportedVersion: return SF_ERR_UNSUPPORTED_VERSION;
    case ErrorCode::kCorruption: return SF_ERR_CORRUPTION;
    case ErrorCode::kConfigMismatch: return SF_ERR_CONFIG_MISMATCH;
    case ErrorCode::kNumeric: return SF_ERR_NUMERIC;
    case ErrorCode::kPartialFailure: return SF_ERR_PARTIAL_FAILURE;
    case ErrorCode::kUsage: return SF_ERR_USAGE;
  }
  return SF_ERR_INTERNAL;
}

// Runs f, translating exceptions into a status plus the thread's last error.
template <class F>
sf_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return SF_OK;
  } catch (const sf::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown exception";
  }
  return SF_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
  if (!p) sf::fail(sf::ErrorCode::kInvalidArgument, std::string(what) + " is NULL");
}

sf::app::Log wrap(sf_log_fn log, void* user) {
  if (!log) return {};
  return [log, user](const std::string& s) { log(s.c_str(), user); };
}

}  // namespace

extern "C" {

const char* sf_version(void) { return sf::app::kVersion; }

const char* sf_last_error(void) { return g_last_error.c_str(); }

const char* sf_status_name(sf_status status) {
  switch (status) {
    case SF_OK: return "ok";
    case SF_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case SF_ERR_CONFIG: return "config";
    case SF_ERR_STATE: return "state";
    case SF_ERR_IO: return "io";
    case SF_ERR_FORMAT: return "format";
    case SF_ERR_UNSUPPORTED_VERSION: return "unsupported-version";
    case SF_ERR_CORRUPTION: return "corruption";
    case SF_ERR_CONFIG_MISMATCH: return "config-mismatch";
    case SF_ERR_NUMERIC: return "numeric";
    case SF_ERR_PARTIAL_FAILURE: return "partial-failure";
    case SF_ERR_USAGE: return "usage";
    case SF_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

int sf_exit_code(sf_status status) {
  switch (status) {
    case SF_OK: return 0;
    case SF_ERR_USAGE:
    case SF_ERR_CONFIG: return 1;
    case SF_ERR_NUMERIC: return 3;
    default: return 2;
  }
}

sf_status sf_options_create(sf_options** out) {
  return guard([&] {
    need(out, "out");
    *out = new sf_options{};
  });
}

void sf_options_free(sf_options* opts) { delete opts; }

sf_status sf_options_set(sf_options* opts, const char* key, const char* value) {
  return guard([&] {
    need(opts, "opts");
    need(key, "key");
    need(value, "value");
    opts->opts.set(key, value);
  });
}

sf_status sf_options_load_file(sf_options* opts, const char* path) {
  return guard([&] {
    need(opts, "opts");
    need(path, "path");
    opts->opts.load_file(path);
  });
}

size_t sf_command_count(void) { return sf::app::commands().size(); }

const char* sf_command_name(size_t index) {
  const auto& c = sf::app::commands();
  return index < c.size() ? c[index].name.c_str() : nullptr;
}

const char* sf_command_summary(size_t index) {
  const auto& c = sf::app::commands();
  return index < c.size() ? c[index].summary.c_str() : nullptr;
}

sf_status sf_option_count(const char* command, size_t* count) {
  return guard([&] {
    need(command, "command");
    need(count, "count");
    *count = sf::app::command(command).flags.size();
  });
}

sf_status sf_option_info_at(const char* command, size_t index, sf_option_info* info) {
  // flag names are built once per process so the returned pointers stay valid
  static const auto flags = [] {
    std::vector<std::vector<std::string>> all;
    for (const auto& c : sf::app::commands()) {
      std::vector<std::string> names;
      for (const auto& f : c.flags) names.push_back(sf::app::flag_name(f.key));
      all.push_back(std::move(names));
    }
    return all;
  }();
  return guard([&] {
    need(command, "command");
    need(info, "info");
    const auto& cmds = sf::app::commands();
    const auto& cmd = sf::app::command(command);
    const std::size_t ci = static_cast<std::size_t>(&cmd - cmds.data());
    if (index >= cmd.flags.size()) sf::fail(sf::ErrorCode::kInvalidArgument, "option index out of range");
    const auto& f = cmd.flags[index];
    info->key = f.key.c_str();
    info->flag = flags[ci][index].c_str();
    info->default_value = f.default_value.c_str();
    info->help = f.help.c_str();
    info->is_switch = f.is_switch ? 1 : 0;
    info->required = f.required ? 1 : 0;
  });
}

sf_status sf_run(const char* command, const sf_options* opts, sf_log_fn log, void* user) {
  return guard([&] {
    need(command, "command");
    need(opts, "opts");
    const auto& cmd = sf::app::command(command);
    sf::app::run(cmd.name, sf::app::resolve_options(cmd, opts->opts), wrap(log, user));
  });
}

sf_status sf_run_synth(const sf_options* o, sf_log_fn l, void* u) { return sf_run("synth", o, l, u); }
sf_status sf_run_train(const sf_options* o, sf_log_fn l, void* u) { return sf_run("train", o, l, u); }
sf_status sf_run_eval(const sf_options* o, sf_log_fn l, void* u) { return sf_run("eval", o, l, u); }
sf_status sf_run_restore(const sf_options* o, sf_log_fn l, void* u) { return sf_run("restore", o, l, u); }
sf_status sf_run_gradcheck(const sf_options* o, sf_log_fn l, void* u) { return sf_run("gradcheck", o, l, u); }
sf_status sf_run_ablate(const sf_options* o, sf_log_fn l, void* u) { return sf_run("ablate", o, l, u); }

sf_status sf_image_load(const char* path, sf_image** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new sf_image{sf::load_image(path)};
  });
}

sf_status sf_image_create(int width, int height, const float* rgb, sf_image** out) {
  return guard([&] {
    need(out, "out");
    if (width <= 0 || height <= 0) sf::fail(sf::ErrorCode::kInvalidArgument, "image size must be positive");
    sf::ImageBuffer img(width, height);
    if (rgb) std::copy(rgb, rgb + img.data().size(), img.data().begin());
    *out = new sf_image{std::move(img)};
  });
}

void sf_image_free(sf_image* image) { delete image; }
int sf_image_width(const sf_image* image) { return image ? image->image.width() : 0; }
int sf_image_height(const sf_image* image) { return image ? image->image.height() : 0; }
const float* sf_image_data(const sf_image* image) { return image ? image->image.data().data() : nullptr; }

sf_status sf_image_save_png(const sf_image* image, const char* path) {
  return guard([&] {
    need(image, "image");
    need(path, "path");
    sf::save_png(image->image, path);
  });
}

sf_status sf_psnr(const sf_image* a, const sf_image* b, double* out) {
  return guard([&] {
    need(a, "restored");
    need(b, "reference");
    need(out, "out");
    *out = sf::psnr(a->image, b->image);
  });
}

sf_status sf_ssim(const sf_image* a, const sf_image* b, double* out) {
  return guard([&] {
    need(a, "restored");
    need(b, "reference");
    need(out, "out");
    *out = sf::ssim(a->image, b->image);
  });
}

sf_status sf_model_build(const sf_options* opts, uint64_t seed, sf_model** out) {
  return guard([&] {
    need(out, "out");
    const sf::ModelConfig cfg = opts ? sf::ModelConfig::from_options(opts->opts) : sf::ModelConfig{};
    *out = new sf_model{sf::Model::build(cfg, seed)};
  });
}

sf_status sf_model_load(const char* path, sf_model** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new sf_model{sf::load_checkpoint(path).model()};
  });
}

void sf_model_free(sf_model* model) { delete model; }

size_t sf_model_param_count(const sf_model* model) {
  return model ? model->model.params().total_elements() : 0;
}

int sf_model_size_multiple(const sf_model* model) {
  return model ? model->model.config().size_multiple() : 0;
}

sf_status sf_model_restore(const sf_model* model, const sf_image* input, sf_image** out) {
  return guard([&] {
    need(model, "model");
    need(input, "input");
    need(out, "out");
    *out = new sf_image{model->model.restore(input->image)};
  });
}

}  // extern "C"
