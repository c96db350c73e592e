/**
 * Entry point: serve the scorer protocol on stdio.
 *
 *   node dist/main.js [--model builtin-tiny] [--seed N] [--max-window N]
 *                     [--modes causal,masked] [--provenance scratch]
 *
 * Pointed at from the rescoring CLI as `scorer.cmd`.
 */

import { Scorer, DEFAULT_BRIDGE_CONFIG } from "./scorer";
import { startServer } from "./protocol";

function parseArgs(argv: string[]) {
  const config = { ...DEFAULT_BRIDGE_CONFIG };
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) throw new Error(`missing value for ${arg}`);
      return argv[i];
    };
    switch (arg) {
      case "--model":
        config.model = next();
        break;
      case "--seed":
        config.seed = Number(next());
        break;
      case "--max-window":
        config.maxWindow = Number(next());
        break;
      case "--modes":
        config.modes = next().split(",");
        break;
      case "--provenance":
        config.provenance = next();
        break;
      default:
        throw new Error(`unknown argument ${arg}`);
    }
  }
  return config;
}

async function main() {
  const config = parseArgs(process.argv.slice(2));
  const scorer = new Scorer(config);
  await startServer(scorer);
}

main().catch((err) => {
  process.stderr.write(`bridge failed: ${err}\n`);
  process.exit(1);
});
