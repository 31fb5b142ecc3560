#include <iostream>

#include <CLI11.hpp>

#include "qpce/app.hpp"
#include "qpce/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Polynomial chaos and Monte Carlo propagation of noisy quantum systems"};
  app.set_version_flag("--version", QPCE_VERSION);
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_prefix;
  std::uint64_t seed = 0;
  bool allow_unconverged = false;

  const std::pair<const char*, const char*> commands[] = {
      {"kle", "Karhunen-Loeve modes, transition rates and eigenfunctions"},
      {"pce", "Propagate the polynomial chaos hierarchy"},
      {"mc", "Monte Carlo trajectory average"},
      {"compare", "PCE against Monte Carlo on the same model"},
      {"sweep", "PCE over a list of orders and stochastic dimensions"},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "INI configuration file")->required();
    sub->add_option("--out", out_prefix, "Output path prefix (overrides config)");
    sub->add_option("--seed", seed, "Monte Carlo seed (overrides config)");
    sub->add_flag("--allow-unconverged", allow_unconverged,
                  "Exit 0 even if Monte Carlo misses its stderr target");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    qpce::AppOptions opts;
    opts.allow_unconverged = allow_unconverged;
    for (auto* sub : subs) {
      if (!*sub) continue;
      if (sub->count("--out")) opts.out_prefix = out_prefix;
      if (sub->count("--seed")) opts.seed = seed;
      const auto config = qpce::load_config(config_path);
      return qpce::run_command(sub->get_name(), config, opts, std::cout);
    }
  } catch (const qpce::Error& e) {
    std::cerr << "qpce: " << qpce::errc_name(e.code()) << ": " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "qpce: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
