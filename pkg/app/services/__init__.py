# CSI pipeline services
