'use strict';

const fs = require('fs');

function main() {
  const path = process.argv[2];
  const lines = fs.readFileSync(path, 'utf8').split('\n').filter((l) => l.trim());
  let stats = null;
  for (const line of lines.slice(1)) {
    stats.count += line.split(',').length;
  }
  process.stdout.write(JSON.stringify({ count: stats.count }) + '\n');
}

main();
