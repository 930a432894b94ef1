// transqr: fit transformation models to censored data and report grouped
// quantile curves with pointwise and simultaneous confidence sets.
#include <transqr/cli_io.hpp>
#include <transqr/parallel.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace transqr;
  CLI::App app{"Transformation-model quantile estimation for censored survival data"};
  app.set_version_flag("--version", TRANSQR_VERSION);

  std::string command;
  std::string config_path, data_path, family, partition, out, phi_mode, transform, covariates;
  std::string time_col, status_col;
  double alpha = 0, p_min = 0, p_max = 0, tau = 0;
  int replicates = 0, threads = default_thread_count();
  std::uint64_t seed = 0;

  app.add_option("command", command, "fit | quantiles | bands | simulate | coverage")
      ->required()
      ->check(CLI::IsMember({"fit", "quantiles", "bands", "simulate", "coverage"}));
  app.add_option("--config", config_path, "run config JSON, or a manifest.json to replay");
  app.add_option("--data", data_path, "CSV file with a header row");
  app.add_option("--covariates", covariates, "comma-separated covariate columns (without --config)");
  app.add_option("--time-col", time_col, "time column name");
  app.add_option("--status-col", status_col, "status column name (1 = event)");
  app.add_option("--family", family, "ph | po");
  app.add_option("--phi-mode", phi_mode, "efficient | minus_gamma_dot | zero");
  app.add_option("--partition", partition, "column, or column:t1,t2,... for numeric cells");
  app.add_option("--alpha", alpha, "1 - confidence level");
  app.add_option("--p-min", p_min, "lower end of the quantile range");
  app.add_option("--p-max", p_max, "upper end of the quantile range");
  app.add_option("--replicates", replicates, "multiplier replicates");
  app.add_option("--transform", transform, "cloglog | logit");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--tau", tau, "upper end of the follow-up window");
  app.add_option("--threads", threads, "worker threads (default: TRANSQR_THREADS or 1)");
  app.add_option("--out", out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) config = load_run_config(config_path);
    config.command = command;
    if (!data_path.empty()) {
      if (!config.data) config.data = DatasetSpec{};
      config.data->path = data_path;
    }
    if (config.data) {
      if (!covariates.empty()) {
        config.data->covariates.clear();
        for (const auto& c : split_list(covariates)) config.data->covariates.push_back({c});
      }
      if (!time_col.empty()) config.data->time_column = time_col;
      if (!status_col.empty()) config.data->status_column = status_col;
      if (!partition.empty()) config.data->partition = parse_partition_flag(partition);
    }
    if (!family.empty()) config.family = parse_family(family);
    if (!phi_mode.empty()) config.phi_mode = parse_phi_mode(phi_mode);
    if (app.count("--alpha")) config.alpha = alpha;
    if (app.count("--p-min")) config.p_min = p_min;
    if (app.count("--p-max")) config.p_max = p_max;
    if (app.count("--replicates")) config.replicates = replicates;
    if (!transform.empty()) config.transform = transform;
    if (app.count("--seed")) config.seed = seed;
    if (app.count("--tau")) config.tau = tau;
    if (!out.empty()) config.out = out;
    if (threads < 1) throw InputError("--threads must be >= 1");
    return run_command(config, threads, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}
