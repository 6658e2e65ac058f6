'use strict';

const fs = require('fs');

function main() {
  const path = process.argv[2];
  const lines = fs.readFileSync(path, 'utf8').split('\n');
  const threshold = ;
  process.stdout.write(JSON.stringify({ rows: lines.length, threshold }) + '\n');
}

main();
