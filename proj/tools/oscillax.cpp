#include <oscillax/pipeline.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

int main(int argc, char** argv) {
  CLI::App app{"oscillax: positive solutions for oscillating nonlinearities in exterior domains"};
  oscillax::CliRequest req;
  std::string out, formats;
  std::vector<std::string> modes;
  for (const auto& [m, name] : oscillax::kModeNames) modes.emplace_back(name);

  app.add_option("mode", req.mode, "what to run")->required()->check(CLI::IsMember(modes));
  app.add_option("--config", req.config, "JSON run configuration")->required();
  app.add_option("--out", out, "output directory (overrides the config)");
  app.add_flag("--parallel", req.parallel, "run independent stages concurrently");
  app.add_option("--formats", formats, "comma-separated subset of csv,json,svg");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (!out.empty()) req.out = out;
  if (!formats.empty()) {
    std::vector<std::string> list;
    std::stringstream ss(formats);
    for (std::string item; std::getline(ss, item, ',');) {
      if (!item.empty()) list.push_back(item);
    }
    req.formats = list;
  }
  return oscillax::run_cli(req, std::cout, std::cerr);
}
