#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "fedprint/driver.hpp"
#include "fedprint/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"fedprint: federated training of a speaker-partitioned classifier and a\n"
               "speaker-verification attack on the exchanged models"};
  app.require_subcommand(1);

  fedprint::DriverOptions opt;
  std::uint64_t seed_value = 0;

  CLI::App* gen = app.add_subcommand("generate", "synthesize the speaker corpus");
  CLI::App* train = app.add_subcommand("train", "run the federated rounds, logging utility per round");
  CLI::App* attack = app.add_subcommand("attack", "score verification trials against the stored models");
  CLI::App* report = app.add_subcommand("report", "summarize a finished run");

  for (CLI::App* sub : {gen, train, attack, report}) {
    sub->add_option("--config", opt.config_path,
                    "experiment file; defaults to built-in settings (generate) or the copy "
                    "stored in the output directory (train/attack/report)");
    sub->add_option("--out", opt.out_override, "output directory, overrides the config");
    sub->add_option("--seed", seed_value, "global seed, overrides the config");
    sub->add_option("--threads", opt.threads,
                    "worker threads; 1 = serial reference (default), 0 = all cores");
    sub->add_flag("--force", opt.force, "overwrite artifacts left by a previous run");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad flags are configuration errors
  }

  CLI::App* picked = app.get_subcommands().front();
  if (picked->count("--seed") > 0) opt.seed_override = seed_value;

  try {
    if (picked == gen) {
      fedprint::cmd_generate(opt, std::cout);
    } else if (picked == train) {
      fedprint::cmd_train(opt, std::cout);
    } else if (picked == attack) {
      fedprint::cmd_attack(opt, std::cout);
    } else {
      fedprint::cmd_report(opt, std::cout);
    }
    return 0;
  } catch (const fedprint::config_error& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  } catch (const fedprint::io_error& e) {
    std::cerr << "io error: " << e.what() << std::endl;
    return 3;
  } catch (const fedprint::data_error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << std::endl;
    return 1;
  }
}
