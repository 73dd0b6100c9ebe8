const express = require('express');
const router = express.Router();

router.get('/vehicles/:id', (req, res) => {
  const vehicle = req.app.locals.store.find(req.params.id);
  if (vehicle == null) {
    res.status(404).end();
    return;
  }
  res.json(vehicle);
});

module.exports = router;
