#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "finslerlab/experiments/runner.hpp"

namespace
{
std::string utc_timestamp()
{
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}
}  // namespace

int main(int argc, char** argv)
{
  namespace fx = finslerlab::experiments;
  CLI::App app{"Shortest closed geodesics on the flat torus and argmin-shrinking perturbations"};
  app.require_subcommand(1);

  std::string config_path, out_path, experiment;
  long long seed = -1;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "run one experiment and write a JSON-lines report");
  run->add_option("config", config_path, "config file (key = value lines)")->required();
  run->add_option("--seed", seed, "random seed (overrides the config)");
  run->add_option("--out", out_path, "report path (default: stdout)");
  run->add_option("--experiment", experiment, "experiment id (overrides the config)");
  run->add_option("--override", overrides, "key=value, applied after the config file");

  std::string report_path, out_dir;
  auto* plot = app.add_subcommand("plot-data", "extract CSV tables from a report");
  plot->add_option("report", report_path, "JSON-lines report")->required();
  plot->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (*run)
  {
    std::ostringstream report;
    int status = 0;
    try
    {
      fx::Config config = fx::Config::load(config_path);
      for (const auto& kv : overrides)
        config.apply_override(kv);
      if (seed >= 0)
        config.set("seed", std::to_string(seed));
      if (!experiment.empty())
        config.set("experiment", experiment);
      status = fx::run(config, report, utc_timestamp());
    }
    catch (const finslerlab::Error& e)
    {
      std::cerr << "finslerlab: " << e.what() << '\n';
      return 2;
    }
    if (out_path.empty())
    {
      std::cout << report.str();
    }
    else
    {
      std::ofstream f(out_path, std::ios::binary);
      f << report.str();
      if (!f)
      {
        std::cerr << "finslerlab: cannot write " << out_path << '\n';
        return 2;
      }
    }
    return status;
  }

  std::ifstream in(report_path);
  if (!in)
  {
    std::cerr << "finslerlab: cannot open " << report_path << '\n';
    return 2;
  }
  try
  {
    fx::emit_plot_data(in, out_dir);
  }
  catch (const std::exception& e)
  {
    std::cerr << "finslerlab: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
