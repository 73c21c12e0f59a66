// Command-line driver. Flags come from the library's option tables, so help
// text and accepted flags cannot drift apart.
#include <CLI11.hpp>

#include <cstdio>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sandformer/sandformer.h"

namespace {

struct FlagSlot {
  std::string key;
  bool is_switch = false;
  std::string text;
  bool on = false;
  CLI::Option* opt = nullptr;
};

struct Subcommand {
  std::string name;
  CLI::App* app = nullptr;
  std::vector<std::unique_ptr<FlagSlot>> flags;
};

void print_line(const char* line, void*) {
  std::fputs(line, stdout);
  std::fputc('\n', stdout);
  std::fflush(stdout);
}

int fail_with(sf_status st) {
  std::fprintf(stderr, "error (%s): %s\n", sf_status_name(st), sf_last_error());
  return sf_exit_code(st);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sand and dust image restoration: synthesis, training, evaluation and checks"};
  app.set_version_flag("--version", std::string(sf_version()));
  app.require_subcommand(1);

  std::vector<Subcommand> subs;
  for (std::size_t i = 0; i < sf_command_count(); ++i) {
    Subcommand s;
    s.name = sf_command_name(i);
    s.app = app.add_subcommand(s.name, sf_command_summary(i));
    size_t n = 0;
    if (sf_option_count(s.name.c_str(), &n) != SF_OK) return fail_with(SF_ERR_INTERNAL);
    for (size_t k = 0; k < n; ++k) {
      sf_option_info info{};
      sf_option_info_at(s.name.c_str(), k, &info);
      auto slot = std::make_unique<FlagSlot>();
      slot->key = info.key;
      slot->is_switch = info.is_switch != 0;
      std::string help = info.help;
      if (info.required) help += " (required)";
      const std::string flag = std::string("--") + info.flag;
      if (slot->is_switch)
        slot->opt = s.app->add_flag(flag, slot->on, help);
      else
        slot->opt = s.app->add_option(flag, slot->text, help);
      slot->opt->default_str(info.default_value);
      s.flags.push_back(std::move(slot));
    }
    subs.push_back(std::move(s));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  for (const auto& s : subs) {
    if (!s.app->parsed()) continue;
    sf_options* raw = nullptr;
    if (sf_options_create(&raw) != SF_OK) return fail_with(SF_ERR_INTERNAL);
    std::unique_ptr<sf_options, decltype(&sf_options_free)> opts(raw, sf_options_free);
    // only flags actually given, so config-file values are not masked by defaults
    for (const auto& f : s.flags) {
      if (f->opt->count() == 0) continue;
      const std::string value = f->is_switch ? (f->on ? "true" : "false") : f->text;
      sf_options_set(opts.get(), f->key.c_str(), value.c_str());
    }
    const sf_status st = sf_run(s.name.c_str(), opts.get(), print_line, nullptr);
    return st == SF_OK ? 0 : fail_with(st);
  }
  return 1;
}
