'use strict';

const fs = require('fs');

function main() {
  const path = process.argv[2];
  const lines = fs.readFileSync(path, 'utf8').split('\n').filter((l) => l.trim());
  const header = lines[0].split(',');
  const report = { columns: header.length, rows: lines.length - 1 };
  process.stdout.write(JSON.stringify(finalReport) + '\n');
}

main();
