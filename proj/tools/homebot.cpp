#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "homebot/tasks.hpp"

namespace {

constexpr int kExitConfig = 2;

template <class Write>
void write_file(const std::string& path, Write&& write, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw homebot::ConfigError("cannot write '" + path + "'");
  write(out);
  if (!out) throw homebot::ConfigError("write to '" + path + "' failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Runs one home-robot task in the simulated arena."};
  std::string arena, task, trace_path, render_path;
  std::string embeddings = std::string(HOMEBOT_DATA_DIR) + "/embeddings.txt";
  std::string kb = std::string(HOMEBOT_DATA_DIR) + "/categories.txt";
  homebot::TaskConfig cfg;
  double limit = 0.0;
  bool quiet = false;
  app.add_option("--arena", arena, "Arena description file")->required();
  app.add_option("--task", task, "Task to run")->required();
  app.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  app.add_option("--dt", cfg.dt, "Simulation step in seconds")->capture_default_str();
  app.add_option("--limit", limit, "Time limit in simulated seconds (task default when omitted)");
  app.add_option("--trace", trace_path, "Write the event trace here");
  app.add_option("--render", render_path, "Write the explored occupancy map here as PGM");
  app.add_flag("--deterministic-race", cfg.deterministic_race, "Run planner races sequentially");
  app.add_flag("--simple-top-grasp", cfg.simple_top_grasp, "Only consider top grasps");
  app.add_option("--embeddings", embeddings, "Word embedding table")->capture_default_str();
  app.add_option("--kb", kb, "Category knowledge base")->capture_default_str();
  app.add_flag("-q,--quiet", quiet, "Print only the summary block");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }
  if (app.count("--limit")) cfg.limit = limit;

  try {
    const homebot::World world = homebot::load_arena_file(arena);
    homebot::load_semantics(cfg, embeddings, kb);
    const homebot::TaskResult result = homebot::execute_task(task, world, cfg);
    if (!quiet) homebot::write_trace(result.report, std::cout);
    homebot::write_summary(result.report, cfg.seed, std::cout);
    if (!trace_path.empty()) write_file(trace_path, [&](std::ostream& os) { homebot::write_trace(result.report, os); });
    if (!render_path.empty())
      write_file(render_path, [&](std::ostream& os) { homebot::write_pgm(result.explored, os); }, std::ios::binary);
    return result.report.success ? 0 : 1;
  } catch (const homebot::ConfigError& e) {
    std::cerr << "homebot: " << e.what() << '\n';
    return kExitConfig;
  }
}
