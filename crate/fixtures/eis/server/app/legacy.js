var cache = {};

function remember(key, value) {
  cache[key] = value;
  return value;
}

// const expiry = 60;
var hits = 0;

module.exports = { remember };
