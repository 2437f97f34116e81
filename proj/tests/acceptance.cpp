// One line per acceptance criterion; exit status 0 iff every line passes.
// usage: acceptance <path to kcn_cli> <config>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <sys/wait.h>

#include "kcn/pipeline.hpp"
#include "kcn/verification.hpp"

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: acceptance <kcn_cli> <config>\n";
    return 2;
  }
  const std::string cli = argv[1], config = argv[2];
  std::ifstream is(config);
  if (!is) {
    std::cerr << "cannot read " << config << '\n';
    return 2;
  }
  auto cfg = kcn::parse_config(is);
  cfg.out = (std::filesystem::current_path() / "acceptance_out").string();

  kcn::Workspace ws(cfg);
  const auto ctx = kcn::make_verify_context(ws);
  std::cout << "constants: C_p=" << ctx.constants.c_p << " C_q=" << ctx.constants.c_q << " S_HL=" << ctx.constants.s_hl
            << " (" << ctx.constants.source << "), alpha=" << ctx.mixed.alpha << '\n';

  bool all = true;
  const auto results = kcn::run_verification(ctx);
  for (auto r : results) {
    if (r.id == 13) {
      // The shipped config must also pass end to end through the command-line front end.
      const auto t0 = std::chrono::steady_clock::now();
      const std::string cmd = "'" + cli + "' verify --config '" + config + "' --out '" + cfg.out + "/cli' > '" +
                              cfg.out + "_cli.log' 2>&1";
      const int status = std::system(cmd.c_str());
      const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
      r.pass = r.pass && code == 0;
      r.detail += "; cli verify exit " + std::to_string(code);
      r.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    all = all && r.pass;
    std::cout << kcn::format_result(r) << '\n';
  }
  std::cout << (all ? "ALL PASS" : "SOME CRITERIA FAILED") << '\n';
  return all ? 0 : 1;
}
