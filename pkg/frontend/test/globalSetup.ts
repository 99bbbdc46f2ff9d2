// Spawns the two backing services the suite needs: an oracle-mode server
// (breakdown and sketch tests) and a replay-mode server (suggestion-loop
// test), after regenerating their fixtures with gen_fixtures.py. Base URLs
// land in test/fixtures/generated/runtime.json for the tests to read.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import * as fs from "node:fs";
import * as net from "node:net";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

const HERE = path.dirname(fileURLToPath(import.meta.url));
const FIXTURES = path.join(HERE, "fixtures");
const GENERATED = path.join(FIXTURES, "generated");

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = net.createServer();
    srv.on("error", reject);
    srv.listen(0, "127.0.0.1", () => {
      const port = (srv.address() as net.AddressInfo).port;
      srv.close((err) => (err ? reject(err) : resolve(port)));
    });
  });
}

interface Server {
  label: string;
  proc: ChildProcess;
  output: () => string;
  exited: boolean;
}

function startServer(label: string, configPath: string): Server {
  const proc = spawn("python3", ["-m", "sketchedit.cli", "serve", "--config", configPath], {
    stdio: ["ignore", "pipe", "pipe"]
  });
  const chunks: string[] = [];
  proc.stdout?.on("data", (d) => chunks.push(String(d)));
  proc.stderr?.on("data", (d) => chunks.push(String(d)));
  const server: Server = {
    label,
    proc,
    output: () => chunks.join("").slice(-4000),
    exited: false
  };
  proc.on("exit", () => {
    server.exited = true;
  });
  return server;
}

async function waitForHealth(url: string, server: Server): Promise<void> {
  for (let i = 0; i < 150; i++) {
    if (server.exited) {
      break;
    }
    try {
      const res = await fetch(`${url}/health`);
      if (res.ok) {
        const body = (await res.json()) as { status?: string };
        if (body.status === "ok") {
          return;
        }
      }
    } catch {
      // not listening yet
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error(
    `${server.label} server at ${url} never became healthy.\n--- output ---\n${server.output()}`
  );
}

async function stopServer(server: Server): Promise<void> {
  if (server.exited) {
    return;
  }
  const done = new Promise<void>((resolve) => server.proc.once("exit", () => resolve()));
  server.proc.kill("SIGTERM");
  const timeout = new Promise<void>((resolve) => setTimeout(resolve, 5000));
  await Promise.race([done, timeout]);
  if (!server.exited) {
    server.proc.kill("SIGKILL");
    await done;
  }
}

export default async function setup(): Promise<() => Promise<void>> {
  const oraclePort = await freePort();
  let replayPort = await freePort();
  while (replayPort === oraclePort) {
    replayPort = await freePort();
  }

  const gen = spawnSync(
    "python3",
    [
      path.join(FIXTURES, "gen_fixtures.py"),
      "--out",
      GENERATED,
      "--oracle-port",
      String(oraclePort),
      "--replay-port",
      String(replayPort)
    ],
    { encoding: "utf-8" }
  );
  if (gen.status !== 0) {
    throw new Error(`gen_fixtures.py failed:\n${gen.stdout ?? ""}\n${gen.stderr ?? ""}`);
  }

  const oracle = startServer("oracle", path.join(GENERATED, "oracle-config.json"));
  const replay = startServer("replay", path.join(GENERATED, "replay-config.json"));
  const oracleUrl = `http://127.0.0.1:${oraclePort}`;
  const replayUrl = `http://127.0.0.1:${replayPort}`;
  try {
    await waitForHealth(oracleUrl, oracle);
    await waitForHealth(replayUrl, replay);
  } catch (err) {
    await stopServer(oracle);
    await stopServer(replay);
    throw err;
  }

  fs.writeFileSync(
    path.join(GENERATED, "runtime.json"),
    JSON.stringify({ oracleUrl, replayUrl }, null, 2) + "\n"
  );

  return async () => {
    await stopServer(oracle);
    await stopServer(replay);
  };
}
